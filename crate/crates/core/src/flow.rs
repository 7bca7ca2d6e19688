//! The spinorial Ricci flow: ungauged and DeTurck-gauged right-hand sides,
//! the lower-order split of the gauged system, an explicit RK4 integrator for
//! the gauged system and per-step monitors.
//!
//! Spinor velocities of the geometric equations are taken with the parallel
//! identification of spinor bundles along the metric path. The integrator
//! advances the stored frame components, so every right-hand side also
//! carries the component velocity obtained by adding the frame rotation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clifford::build_rep;
use crate::error::{Error, Result};
use crate::functionals::{w_lambda_of, Evaluation, FlowConstants};
use crate::geometry::{deturck_from_caches, GeometryCache};
use crate::grid::{
    partial_derivative, Grid, LinearField, ScalarField, Scheme, Spinor, SpinorField, Sym2Field,
    VectorField,
};
use crate::linalg::min_eigenvalue;
use crate::spinor::{
    covariant_derivative_spinor, kosmann_of_jet, laplacian_of_jet, parallel_to_components,
    re_inner_field, SpinGeometry, SpinorJet,
};
use crate::variation::{first_variation_of, VariationDirection};

/// |ψ|² must stay above this multiple of c.
pub const PSI_FLOOR: f64 = 1e-8;

/// A step is rejected once max| |ψ|² − c | exceeds this multiple of c.
pub const PSI_DRIFT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct FlowState {
    pub g: Sym2Field,
    pub f: ScalarField,
    pub psi: SpinorField,
    pub t: f64,
    pub constants: FlowConstants,
    /// Background metric of the DeTurck vector field.
    pub g0: Sym2Field,
}

impl FlowState {
    /// Starts a flow with the initial metric as DeTurck background.
    pub fn new(g: Sym2Field, f: ScalarField, psi: SpinorField, constants: FlowConstants) -> Result<Self> {
        g.grid().ensure_same(f.grid())?;
        g.grid().ensure_same(psi.grid())?;
        Ok(Self {
            g0: g.clone(),
            g,
            f,
            psi,
            t: 0.0,
            constants,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.g.grid()
    }

    pub fn evaluate(&self) -> Result<Evaluation> {
        Evaluation::new(&self.g, &self.f, &self.psi, self.constants.tau)
    }

    /// max | |ψ|² − c |.
    pub fn psi_norm_deviation(&self) -> f64 {
        let c = self.constants.c;
        self.psi.norm_sq().data.iter().fold(0.0f64, |m, &x| m.max((x - c).abs()))
    }
}

/// Time derivatives of (g, f, ψ).
#[derive(Debug, Clone)]
pub struct FlowRhs {
    pub g_dot: Sym2Field,
    pub f_dot: ScalarField,
    /// Rate of change of the stored spinor components.
    pub psi_dot: SpinorField,
    /// Velocity under the parallel identification of spinor bundles.
    pub psi_dot_parallel: SpinorField,
}

impl FlowRhs {
    pub fn direction(&self) -> VariationDirection {
        VariationDirection {
            g_dot: self.g_dot.clone(),
            f_dot: self.f_dot.clone(),
            psi_dot: self.psi_dot.clone(),
            tau_dot: 0.0,
        }
    }
}

fn check_psi(ev: &Evaluation, c: f64) -> Result<()> {
    let floor = PSI_FLOOR * c;
    for (p, &v) in ev.psi_sq.data.iter().enumerate() {
        if !(v >= floor) {
            return Err(Error::SpinorTooSmall { point: p, value: v, floor });
        }
    }
    Ok(())
}

/// Δ_fψ + (|∇ψ|²/|ψ|²)ψ.
fn harmonic_map_part(ev: &Evaluation) -> SpinorField {
    let lap = laplacian_of_jet(&ev.jet, &ev.sg, Some(&ev.w));
    lap.map_points(|p, v| v + ev.psi.at(p) * cr(ev.grad_psi_sq.data[p] / ev.psi_sq.data[p]))
}

fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// ∇_Xψ for a coordinate vector field X.
fn directional(jet: &SpinorJet, x: &VectorField) -> SpinorField {
    let n = jet.coord.len();
    SpinorField::from_fn_indexed(*jet.value.grid(), |p| {
        (0..n).fold(Spinor::zeros(), |acc, i| acc + jet.coord[i].at(p) * cr(x.comps[i][p]))
    })
}

/// df(X) pointwise.
fn df_of(ev: &Evaluation, x: &VectorField) -> ScalarField {
    let n = ev.n();
    let data = (0..ev.f.data.len())
        .map(|p| (0..n).map(|i| ev.w.df.comps[i][p] * x.comps[i][p]).sum())
        .collect();
    ScalarField::new(*ev.f.grid(), data).expect("grid-sized data")
}

fn finish(ev: &Evaluation, g_dot: Sym2Field, f_dot: ScalarField, psi_dot_parallel: SpinorField) -> FlowRhs {
    let g_dot = g_dot.symmetrized();
    let psi_dot = parallel_to_components(&ev.geo().g, &g_dot, &ev.psi, &psi_dot_parallel, &ev.sg.rep);
    FlowRhs {
        g_dot,
        f_dot,
        psi_dot,
        psi_dot_parallel,
    }
}

/// Right-hand side of the ungauged system:
/// ġ = −2(Ric + ℒ_{½∇f − V_f/τ}g − (2/τ)S − (λ/2τ)g),
/// ḟ = −Δf − R + λn/2τ + (4/τ)tr S + (2/τ)div V_f,
/// ψ̇ = Δ_fψ + (|∇ψ|²/|ψ|²)ψ.
pub fn ungauged_rhs(state: &FlowState) -> Result<FlowRhs> {
    let ev = state.evaluate()?;
    ungauged_rhs_of(&ev, &state.constants)
}

pub fn ungauged_rhs_of(ev: &Evaluation, k: &FlowConstants) -> Result<FlowRhs> {
    check_psi(ev, k.c)?;
    let geo = ev.geo();
    let (tau, lambda) = (k.tau, k.lambda);
    let n = ev.n() as f64;
    let vf = &ev.tensors.vf;
    let residual = ev
        .w
        .ric_f
        .plus(&geo.lie_derivative_metric(vf), -1.0 / tau)
        .plus(&ev.tensors.s, -2.0 / tau)
        .plus(&geo.g, -lambda / (2.0 * tau));
    let g_dot = residual.scaled(-2.0);
    let tr_s = geo.trace(&ev.tensors.s);
    let div_v = geo.divergence_vector(vf);
    let lap = geo.laplacian(&ev.f);
    let r = &geo.scalar;
    let f_dot = ScalarField::new(
        *ev.f.grid(),
        (0..ev.f.data.len())
            .map(|p| {
                -lap.data[p] - r.data[p] + lambda * n / (2.0 * tau) + 4.0 / tau * tr_s.data[p]
                    + 2.0 / tau * div_v.data[p]
            })
            .collect(),
    )?;
    Ok(finish(ev, g_dot, f_dot, harmonic_map_part(ev)))
}

/// Right-hand side of the DeTurck-gauged system with background g₀:
/// ġ = −2Ric + ℒ_W g + (4/τ)S + (λ/τ)g,
/// ḟ = −(1−|ψ|²/τ)Δf − R + λn/2τ + (4/τ)tr S + (2/τ)div U + (1−|ψ|²/τ)|∇f|² + ⟨∇f, W − (2/τ)U⟩,
/// ψ̇ = Δ_fψ + (|∇ψ|²/|ψ|²)ψ + (1−|ψ|²/τ)∇_{∇f}ψ + ℒ_{W−(2/τ)U}ψ.
pub fn gauged_rhs(state: &FlowState) -> Result<FlowRhs> {
    let ev = state.evaluate()?;
    let geo0 = GeometryCache::new(&state.g0)?;
    gauged_rhs_of(&ev, &geo0, &state.constants)
}

pub fn gauged_rhs_of(ev: &Evaluation, geo0: &GeometryCache, k: &FlowConstants) -> Result<FlowRhs> {
    let parts = gauged_parts(ev, geo0, k)?;
    Ok(finish(ev, parts.g_dot, parts.f_dot, parts.psi_dot))
}

struct GaugedParts {
    g_dot: Sym2Field,
    f_dot: ScalarField,
    psi_dot: SpinorField,
    /// −(1−|ψ|²/τ)Δf, the top-order part of the scalar equation.
    f_top: ScalarField,
}

fn gauged_parts(ev: &Evaluation, geo0: &GeometryCache, k: &FlowConstants) -> Result<GaugedParts> {
    check_psi(ev, k.c)?;
    let geo = ev.geo();
    let (tau, lambda) = (k.tau, k.lambda);
    let n = ev.n() as f64;
    let w_vec = deturck_from_caches(geo, geo0);
    let u = &ev.tensors.u;

    let g_dot = geo
        .ric
        .scaled(-2.0)
        .plus(&geo.lie_derivative_metric(&w_vec), 1.0)
        .plus(&ev.tensors.s, 4.0 / tau)
        .plus(&geo.g, lambda / tau);

    let x = w_vec.plus(u, -2.0 / tau);
    let lap = geo.laplacian(&ev.f);
    let tr_s = geo.trace(&ev.tensors.s);
    let div_u = geo.divergence_vector(u);
    let df_x = df_of(ev, &x);
    let sq = &ev.psi_sq.data;
    let len = ev.f.data.len();
    let f_top = ScalarField::new(
        *ev.f.grid(),
        (0..len).map(|p| -(1.0 - sq[p] / tau) * lap.data[p]).collect(),
    )?;
    let f_dot = ScalarField::new(
        *ev.f.grid(),
        (0..len)
            .map(|p| {
                f_top.data[p] - geo.scalar.data[p] + lambda * n / (2.0 * tau)
                    + 4.0 / tau * tr_s.data[p]
                    + 2.0 / tau * div_u.data[p]
                    + (1.0 - sq[p] / tau) * ev.w.grad_f_sq.data[p]
                    + df_x.data[p]
            })
            .collect(),
    )?;

    let along_f = directional(&ev.jet, &ev.w.grad_f);
    let psi_dot = harmonic_map_part(ev)
        .plus(&along_f.map_points(|p, v| v * cr(1.0 - sq[p] / tau)), 1.0)
        .plus(&kosmann_of_jet(&x, &ev.jet, &ev.sg), 1.0);

    Ok(GaugedParts {
        g_dot,
        f_dot,
        psi_dot,
        f_top,
    })
}

/// Which top-order spinor endomorphism is subtracted in the lower-order
/// split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AForm {
    /// A^{kl}s = g^{kl}s + (1/τ)Re⟨ψ, e_a·e^l·s⟩ e_a·e^k·ψ.
    Printed,
    /// The printed form with the Clifford factors on ψ swapped,
    /// A^{kl}s = g^{kl}s + (1/τ)Re⟨ψ, e_a·e^l·s⟩ e^k·e_a·ψ, which is the
    /// ordering the coercivity argument actually needs.
    Reordered,
    /// The endomorphism matching the symbol of the gauged spinor equation:
    /// A^{kl}s = g^{kl}s + (1/2τ)(Re⟨ψ, e_a·e^k·s⟩ e^l·e_a·ψ − g^{kl}Re⟨ψ,s⟩ψ),
    /// symmetrized in k, l.
    Derived,
}

/// A(ψ)^{kl} applied to s at one point, with `gu[k]` the Clifford action of
/// dx^k. Returns the k,l-symmetrized value.
pub fn apply_a(
    form: AForm,
    psi: &Spinor,
    s: &Spinor,
    k: usize,
    l: usize,
    g_inv: f64,
    gu: &[crate::clifford::M2],
    gamma: &[crate::clifford::M2],
    tau: f64,
) -> Spinor {
    let one = |k: usize, l: usize| -> Spinor {
        let mut out = s * cr(g_inv);
        match form {
            AForm::Printed => {
                for ga in gamma {
                    let r = crate::clifford::re_inner(psi, &(ga * gu[l] * s));
                    out += ga * gu[k] * psi * cr(r / tau);
                }
            }
            AForm::Reordered => {
                for ga in gamma {
                    let r = crate::clifford::re_inner(psi, &(ga * gu[l] * s));
                    out += gu[k] * ga * psi * cr(r / tau);
                }
            }
            AForm::Derived => {
                for ga in gamma {
                    let r = crate::clifford::re_inner(psi, &(ga * gu[k] * s));
                    out += gu[l] * ga * psi * cr(r / (2.0 * tau));
                }
                out -= psi * cr(g_inv * crate::clifford::re_inner(psi, s) / (2.0 * tau));
            }
        }
        out
    };
    (one(k, l) + one(l, k)) * cr(0.5)
}

/// Second covariant derivatives ∇̂_k∇̂_lψ for the spin connection of g₀,
/// acting on the stored components; indexed `[k * n + l]`.
fn spinor_hessian(psi: &SpinorField, sg0: &SpinGeometry) -> Result<Vec<SpinorField>> {
    let n = sg0.n();
    let jet = covariant_derivative_spinor(psi, sg0)?;
    let mut out = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            let d = partial_derivative(&jet.coord[l], k, Scheme::Spectral)?;
            out.push(d.map_points(|p, v| {
                let c = &sg0.geo.christoffel[p];
                let mut acc = v + sg0.conn[p][k] * jet.coord[l].at(p);
                for m in 0..n {
                    acc -= jet.coord[m].at(p) * cr(c[m][k][l]);
                }
                acc
            }));
        }
    }
    Ok(out)
}

/// ℱ, 𝒢, ℋ: the gauged right-hand sides with their top-order parts removed.
#[derive(Debug, Clone)]
pub struct LowerOrderParts {
    /// Gauged metric RHS − g^{kl}∇̂_k∇̂_l g.
    pub metric: Sym2Field,
    /// Gauged scalar RHS + (1 − |ψ|²/τ)Δf.
    pub scalar: ScalarField,
    /// Gauged spinor RHS (parallel) − A(ψ)^{kl}∇̂_k∇̂_lψ.
    pub spinor: SpinorField,
}

pub fn lower_order_decomposition(state: &FlowState, form: AForm) -> Result<LowerOrderParts> {
    let ev = state.evaluate()?;
    let geo = ev.geo();
    let sg0 = SpinGeometry::new(GeometryCache::new(&state.g0)?, build_rep(ev.n())?)?;
    let k = &state.constants;
    let parts = gauged_parts(&ev, &sg0.geo, k)?;
    let n = ev.n();
    let len = ev.f.data.len();

    let hess_g = sg0.geo.covariant_derivative(&sg0.geo.covariant_derivative(&geo.g));
    let mut top_g = Sym2Field::zeros(*ev.f.grid(), 2);
    for (ij, comp) in top_g.comps.iter_mut().enumerate() {
        for (p, v) in comp.iter_mut().enumerate() {
            let gi = &geo.inverse[p];
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    acc += gi[a][b] * hess_g.comps[(a * n + b) * n * n + ij][p];
                }
            }
            *v = acc;
        }
    }
    let metric = parts.g_dot.plus(&top_g, -1.0);
    let scalar = parts.f_dot.plus(&parts.f_top, -1.0);

    let hess_psi = spinor_hessian(&ev.psi, &sg0)?;
    let gamma = ev.sg.rep.gammas();
    let top_psi = SpinorField::from_fn_indexed(*ev.f.grid(), |p| {
        let psi = ev.psi.at(p);
        let gu = &ev.sg.gamma_upper[p][..n];
        let gi = &geo.inverse[p];
        let mut acc = Spinor::zeros();
        for a in 0..n {
            for b in 0..n {
                let s = hess_psi[a * n + b].at(p);
                acc += apply_a(form, &psi, &s, a, b, gi[a][b], gu, gamma, k.tau);
            }
        }
        acc
    });
    debug_assert_eq!(top_psi.grid().len(), len);
    let spinor = parts.psi_dot.plus(&top_psi, -1.0);
    Ok(LowerOrderParts { metric, scalar, spinor })
}

/// Largest stable RK4 step for the gauged system, estimated from the top
/// spectral eigenvalue (π·res)² per axis and the largest principal
/// coefficient 1 + c/τ.
pub fn stable_dt(grid: &Grid, k: &FlowConstants) -> f64 {
    let kmax = PI * grid.res() as f64;
    let coef = 1.0 + k.c / k.tau;
    2.5 / (coef * grid.n() as f64 * kmax * kmax)
}

fn require_forward(k: &FlowConstants) -> Result<()> {
    if !(k.c > k.tau) {
        return Err(Error::Regime(format!(
            "time marching needs the fully forward regime c > tau (got c = {}, tau = {}): {}",
            k.c,
            k.tau,
            if k.c < k.tau {
                "c < tau is the backward-parabolic regime for the scalar equation"
            } else {
                "c = tau is the degenerate regime, the scalar equation loses its second-order term"
            }
        )));
    }
    Ok(())
}

fn check_state(s: &FlowState) -> Result<()> {
    let n = s.grid().n();
    for p in 0..s.grid().len() {
        let m = s.g.mat(p);
        let e = min_eigenvalue(&m, n);
        if !e.is_finite() {
            return Err(Error::NonFinite("metric"));
        }
        if !(e > crate::linalg::SPD_MIN_EIGENVALUE) {
            return Err(Error::NotPositiveDefinite { point: p, min_eig: e });
        }
    }
    if s.f.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("potential"));
    }
    if s.psi.comps.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("spinor"));
    }
    let dev = s.psi_norm_deviation();
    if dev > PSI_DRIFT_TOLERANCE * s.constants.c {
        return Err(Error::InvalidParameter(format!(
            "|psi|^2 drifted from c by {dev:e}, beyond the tolerance {:e}",
            PSI_DRIFT_TOLERANCE * s.constants.c
        )));
    }
    Ok(())
}

fn advance(s: &FlowState, r: &FlowRhs, h: f64) -> FlowState {
    FlowState {
        g: s.g.plus(&r.g_dot, h),
        f: s.f.plus(&r.f_dot, h),
        psi: s.psi.plus(&r.psi_dot, h),
        t: s.t + h,
        constants: s.constants,
        g0: s.g0.clone(),
    }
}

/// One classical RK4 step of the gauged system.
pub fn step_rk4(state: &FlowState, dt: f64) -> Result<FlowState> {
    require_forward(&state.constants)?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let geo0 = GeometryCache::new(&state.g0)?;
    let rhs = |s: &FlowState| -> Result<FlowRhs> { gauged_rhs_of(&s.evaluate()?, &geo0, &s.constants) };
    let k1 = rhs(state)?;
    let k2 = rhs(&advance(state, &k1, 0.5 * dt))?;
    let k3 = rhs(&advance(state, &k2, 0.5 * dt))?;
    let k4 = rhs(&advance(state, &k3, dt))?;
    let w = dt / 6.0;
    let mut next = FlowState {
        g: state
            .g
            .plus(&k1.g_dot, w)
            .plus(&k2.g_dot, 2.0 * w)
            .plus(&k3.g_dot, 2.0 * w)
            .plus(&k4.g_dot, w)
            .symmetrized(),
        f: state
            .f
            .plus(&k1.f_dot, w)
            .plus(&k2.f_dot, 2.0 * w)
            .plus(&k3.f_dot, 2.0 * w)
            .plus(&k4.f_dot, w),
        psi: state
            .psi
            .plus(&k1.psi_dot, w)
            .plus(&k2.psi_dot, 2.0 * w)
            .plus(&k3.psi_dot, 2.0 * w)
            .plus(&k4.psi_dot, w),
        t: state.t + dt,
        constants: state.constants,
        g0: state.g0.clone(),
    };
    next.t = state.t + dt;
    check_state(&next)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub w_lambda: f64,
    /// ∫(2τ|E_g|² + 8|Δ_fψ + (|∇ψ|²/|ψ|²)ψ|²)dΩ with E_g the metric residual.
    pub dissipation: f64,
    /// Exact instantaneous d𝕎_λ/dt along the gauged right-hand side.
    pub dw_dt: f64,
    /// dw_dt + dissipation: what the monotonicity identity leaves out.
    pub exchange: f64,
    /// ∫dΩ.
    pub mass: f64,
    pub psi_norm_dev: f64,
    pub regime_coeff: f64,
    pub step_accepted: bool,
}

/// Monitors of a single state.
pub fn monitor(state: &FlowState) -> Result<MonitorRecord> {
    let ev = state.evaluate()?;
    let k = &state.constants;
    let geo0 = GeometryCache::new(&state.g0)?;
    let rhs = gauged_rhs_of(&ev, &geo0, k)?;
    let dissipation = dissipation_of(&ev, k)?;
    let dw_dt = first_variation_of(&ev, k.lambda, &rhs.direction())?;
    Ok(MonitorRecord {
        t: state.t,
        w_lambda: w_lambda_of(&ev, k.lambda),
        dissipation,
        dw_dt,
        exchange: dw_dt + dissipation,
        mass: ev.measure.total(),
        psi_norm_dev: state.psi_norm_deviation(),
        regime_coeff: 1.0 - k.c / k.tau,
        step_accepted: true,
    })
}

pub fn dissipation_of(ev: &Evaluation, k: &FlowConstants) -> Result<f64> {
    check_psi(ev, k.c)?;
    let geo = ev.geo();
    let tau = k.tau;
    let residual = ev
        .w
        .ric_f
        .plus(&geo.lie_derivative_metric(&ev.tensors.vf), -1.0 / tau)
        .plus(&ev.tensors.s, -2.0 / tau)
        .plus(&geo.g, -k.lambda / (2.0 * tau));
    let metric_sq = geo.pairing(&residual, &residual);
    let spin = harmonic_map_part(ev).norm_sq();
    Ok(ev.integrate_with(|p| 2.0 * tau * metric_sq.data[p] + 8.0 * spin.data[p]))
}

/// ∫(−(2/τ)tr S)(4Re⟨D_f²ψ,ψ⟩ − τR_f − λ(f−n−1))dΩ, the part of d𝕎/dt
/// coming from the change of ∫dΩ-weights under the ungauged flow when
/// |ψ|² ≡ c.
pub fn measure_exchange(ev: &Evaluation, k: &FlowConstants) -> Result<f64> {
    let geo = ev.geo();
    let n = ev.n() as f64;
    let tr_s = geo.trace(&ev.tensors.s);
    let d2 = re_inner_field(&ev.df_squared()?, &ev.psi);
    Ok(ev.integrate_with(|p| {
        -2.0 / k.tau
            * tr_s.data[p]
            * (4.0 * d2.data[p] - k.tau * ev.w.r_f.data[p] - k.lambda * (ev.f.data[p] - n - 1.0))
    }))
}

/// Rate of ∫dΩ under the ungauged flow: −(2/τ)∫tr S dΩ.
pub fn mass_rate(ev: &Evaluation, k: &FlowConstants) -> f64 {
    ev.integrate(&ev.geo().trace(&ev.tensors.s)) * (-2.0 / k.tau)
}

#[derive(Debug, Clone)]
pub struct FlowRun {
    pub records: Vec<MonitorRecord>,
    pub state: FlowState,
    /// Why the run stopped early, if it did.
    pub stopped: Option<String>,
}

/// Marches `n_steps` RK4 steps, recording monitors before the first step and
/// after every accepted one. A rejected step ends the run with a record
/// flagged as not accepted.
pub fn run_with_monitors(state: &FlowState, dt: f64, n_steps: usize) -> Result<FlowRun> {
    require_forward(&state.constants)?;
    let c = state.constants.c;
    let dev = state.psi_norm_deviation();
    if dev > 1e-10 * c.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "initial |psi|^2 must equal c pointwise (deviation {dev:e})"
        )));
    }
    let mut records = vec![monitor(state)?];
    let mut current = state.clone();
    for _ in 0..n_steps {
        match step_rk4(&current, dt) {
            Ok(next) => {
                current = next;
                records.push(monitor(&current)?);
            }
            Err(e) => {
                let mut last = records.last().cloned().expect("at least one record");
                last.t = current.t + dt;
                last.step_accepted = false;
                records.push(last);
                return Ok(FlowRun {
                    records,
                    state: current,
                    stopped: Some(e.to_string()),
                });
            }
        }
    }
    Ok(FlowRun {
        records,
        state: current,
        stopped: None,
    })
}

/// Aggregate checks over a monitored run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    /// Largest step-to-step increase of 𝕎_λ (negative if strictly decreasing).
    pub max_increase: f64,
    /// Every step satisfies 𝕎(t_{k+1}) ≤ 𝕎(t_k) + 1e-8(1 + |𝕎(t_k)|).
    pub monotone: bool,
    /// max |Δ𝕎/Δt + D̄| / D̄ with D̄ the trapezoid mean of the dissipation.
    pub max_gap: f64,
    /// Same with the measured exchange term added back.
    pub max_gap_with_exchange: f64,
    pub max_psi_dev: f64,
    pub mass_initial: f64,
    pub mass_final: f64,
}

pub fn summarize(records: &[MonitorRecord]) -> RunSummary {
    let accepted: Vec<&MonitorRecord> = records.iter().filter(|r| r.step_accepted).collect();
    let mut max_increase = f64::NEG_INFINITY;
    let mut monotone = true;
    let mut max_gap = 0.0f64;
    let mut max_gap_x = 0.0f64;
    for w in accepted.windows(2) {
        let (a, b) = (w[0], w[1]);
        let inc = b.w_lambda - a.w_lambda;
        max_increase = max_increase.max(inc);
        if inc > 1e-8 * (1.0 + a.w_lambda.abs()) {
            monotone = false;
        }
        let dt = b.t - a.t;
        let rate = inc / dt;
        let d = 0.5 * (a.dissipation + b.dissipation);
        let x = 0.5 * (a.exchange + b.exchange);
        if d > 0.0 {
            max_gap = max_gap.max((rate + d).abs() / d);
            max_gap_x = max_gap_x.max((rate + d - x).abs() / d);
        }
    }
    let first = accepted.first();
    let last = accepted.last();
    RunSummary {
        steps: accepted.len().saturating_sub(1),
        max_increase,
        monotone,
        max_gap,
        max_gap_with_exchange: max_gap_x,
        max_psi_dev: accepted.iter().map(|r| r.psi_norm_dev).fold(0.0, f64::max),
        mass_initial: first.map_or(f64::NAN, |r| r.mass),
        mass_final: last.map_or(f64::NAN, |r| r.mass),
    }
}

/// Perturbed flat start: g = δ + amp·η, f normalized to ∫dΩ = 1 after an
/// amp-sized perturbation, ψ = √c·exp(iθ·σ)χ₀ with |χ₀| = 1.
pub fn perturbed_flat_start(
    grid: Grid,
    seed: u64,
    amp: f64,
    constants: FlowConstants,
) -> Result<FlowState> {
    let mut rng = crate::random::BandLimited::new(grid, seed, 2)?;
    let g = rng.metric(amp)?;
    let f_pert = rng.scalar(amp);
    let chi = Spinor::new(cr(0.6), Complex64::new(0.0, 0.8));
    let psi = rng.unit_spinor(constants.c, chi, amp);
    let base = crate::grid::weighted_measure(&g, &f_pert, constants.tau)?.total();
    let f = f_pert.map(|x| x + base.ln());
    FlowState::new(g, f, psi, constants)
}
