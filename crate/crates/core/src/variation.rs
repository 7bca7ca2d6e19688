//! First variation of 𝕎_λ, finite-difference oracles along linear paths,
//! Euler–Lagrange residuals, the critical-point identities and the regime
//! classification by (c, τ).
//!
//! Spinor velocities are stored as rates of change of the frame components
//! of ψ. The formulas below want the velocity under the parallel
//! identification of spinor bundles along g + tġ; the two differ by the
//! rotation of the symmetric-root frame, see
//! [`crate::spinor::components_to_parallel`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{w_lambda_of, Evaluation, FlowConstants};
use crate::grid::{Grid, LinearField, ScalarField, SpinorField, Sym2Field};
use crate::random::BandLimited;
use crate::spinor::{components_to_parallel, laplacian_of_jet, re_inner_field};

#[derive(Debug, Clone, PartialEq)]
pub struct VariationDirection {
    pub g_dot: Sym2Field,
    pub f_dot: ScalarField,
    /// Rate of change of the stored spinor components.
    pub psi_dot: SpinorField,
    pub tau_dot: f64,
}

impl VariationDirection {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            g_dot: Sym2Field::zeros(grid, 2),
            f_dot: ScalarField::zeros(grid),
            psi_dot: SpinorField::zeros(grid),
            tau_dot: 0.0,
        }
    }

    /// Band-limited random direction with unit-order amplitudes.
    pub fn random(grid: Grid, seed: u64, kmax: usize, tau_dot: f64) -> Result<Self> {
        let mut rng = BandLimited::new(grid, seed, kmax)?;
        Ok(Self {
            g_dot: rng.sym2(1.0),
            f_dot: rng.scalar(1.0),
            psi_dot: rng.spinor(1.0),
            tau_dot,
        })
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        grid.ensure_same(self.g_dot.grid())?;
        grid.ensure_same(self.f_dot.grid())?;
        grid.ensure_same(self.psi_dot.grid())?;
        if self.g_dot.rank() != 2 {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Removes the component of ψ̇ along ψ pointwise, so the direction is
    /// tangent to the bundle of spinors with fixed pointwise norm.
    pub fn tangent_to_sphere_bundle(&self, psi: &SpinorField) -> Self {
        let dot = re_inner_field(&self.psi_dot, psi);
        let sq = psi.norm_sq();
        let psi_dot = self.psi_dot.map_points(|p, v| {
            let s = if sq.data[p] > 0.0 { dot.data[p] / sq.data[p] } else { 0.0 };
            v - psi.at(p) * num_complex::Complex64::new(s, 0.0)
        });
        Self { psi_dot, ..self.clone() }
    }
}

/// Point on the linear path (g + tġ, f + tḟ, ψ + tψ̇, τ + tτ̇).
#[derive(Debug, Clone)]
pub struct PathPoint {
    pub g: Sym2Field,
    pub f: ScalarField,
    pub psi: SpinorField,
    pub tau: f64,
}

pub fn path_point(
    g: &Sym2Field,
    f: &ScalarField,
    psi: &SpinorField,
    tau: f64,
    dir: &VariationDirection,
    t: f64,
) -> PathPoint {
    PathPoint {
        g: g.plus(&dir.g_dot, t),
        f: f.plus(&dir.f_dot, t),
        psi: psi.plus(&dir.psi_dot, t),
        tau: tau + t * dir.tau_dot,
    }
}

/// ½ tr_g ġ − ḟ − nτ̇/2τ, the logarithmic rate of dΩ.
pub fn measure_rate(ev: &Evaluation, dir: &VariationDirection) -> ScalarField {
    let n = ev.n() as f64;
    let tr = ev.geo().trace(&dir.g_dot);
    let shift = n * dir.tau_dot / (2.0 * ev.tau);
    tr.zip_map(&dir.f_dot, |t, fd| 0.5 * t - fd - shift)
}

/// ψ̇ under the parallel identification along g + tġ.
pub fn parallel_velocity(ev: &Evaluation, dir: &VariationDirection) -> SpinorField {
    components_to_parallel(&ev.geo().g, &dir.g_dot, &ev.psi, &dir.psi_dot, &ev.sg.rep)
}

/// d𝕎_λ/dt as an integral of the closed-form first-variation integrand.
pub fn first_variation_rhs(
    g: &Sym2Field,
    f: &ScalarField,
    psi: &SpinorField,
    k: &FlowConstants,
    dir: &VariationDirection,
) -> Result<f64> {
    let ev = Evaluation::new(g, f, psi, k.tau)?;
    first_variation_of(&ev, k.lambda, dir)
}

pub fn first_variation_of(ev: &Evaluation, lambda: f64, dir: &VariationDirection) -> Result<f64> {
    dir.check(ev.psi.grid())?;
    let geo = ev.geo();
    let n = ev.n() as f64;
    let tau = ev.tau;
    let d2 = ev.df_squared()?;
    let psi_dot = parallel_velocity(ev, dir);
    let rate = measure_rate(ev, dir);

    let soliton = ev.w.ric_f.plus(&geo.g, -lambda / (2.0 * tau));
    let weighted = dir.g_dot.combine(tau, &geo.g, -dir.tau_dot);
    let first = geo.pairing(&weighted, &soliton);
    let lv = geo.lie_derivative_metric(&ev.tensors.v);
    let second = geo.pairing(&dir.g_dot, &lv.plus(&ev.tensors.s, 2.0));
    let third = re_inner_field(&d2, &psi_dot);
    let d2_psi = re_inner_field(&d2, &ev.psi);

    Ok(ev.integrate_with(|p| {
        let bracket = 4.0 * d2_psi.data[p]
            - tau * ev.w.r_f.data[p]
            - lambda * (ev.f.data[p] - n - 1.0);
        first.data[p] - second.data[p] + 8.0 * third.data[p] + rate.data[p] * bracket
    }))
}

/// Central difference of 𝕎_λ along the linear path.
pub fn first_variation_fd(
    g: &Sym2Field,
    f: &ScalarField,
    psi: &SpinorField,
    k: &FlowConstants,
    dir: &VariationDirection,
    eps: f64,
) -> Result<f64> {
    let at = |t: f64| -> Result<f64> {
        let q = path_point(g, f, psi, k.tau, dir, t);
        let ev = Evaluation::new(&q.g, &q.f, &q.psi, q.tau)?;
        Ok(w_lambda_of(&ev, k.lambda))
    };
    Ok((at(eps)? - at(-eps)?) / (2.0 * eps))
}

/// One integral evolution formula compared with its path derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResidual {
    pub name: String,
    pub numeric: f64,
    pub formula: f64,
    pub residual: f64,
    pub relative: f64,
}

/// The integrated quantities whose evolution is checked.
fn tracked_integrals(ev: &Evaluation) -> [f64; 6] {
    let n = ev.n() as f64;
    [
        ev.integrate(&ev.w.r_f),
        ev.integrate_with(|p| ev.w.r_f.data[p] * ev.psi_sq.data[p]),
        ev.integrate(&ev.grad_psi_sq),
        ev.integrate_with(|p| ev.f.data[p] - n),
        ev.measure.total(),
        ev.integrate(&ev.psi_sq),
    ]
}

const TRACKED_NAMES: [&str; 6] = [
    "R_f",
    "R_f |psi|^2",
    "|grad psi|^2",
    "f - n",
    "measure",
    "|psi|^2",
];

/// Closed-form rates of the tracked integrals.
fn tracked_rates(ev: &Evaluation, dir: &VariationDirection) -> Result<[f64; 6]> {
    let geo = ev.geo();
    let w = &ev.w;
    let n = ev.n() as f64;
    let rate = measure_rate(ev, dir);
    let psi_dot = parallel_velocity(ev, dir);
    let d2 = ev.df_squared()?;
    let lap = laplacian_of_jet(&ev.jet, &ev.sg, Some(w));

    let g_ric = geo.pairing(&dir.g_dot, &w.ric_f);
    let divdiv = {
        let once = w.div_f(geo, &dir.g_dot);
        let twice = w.div_f(geo, &once);
        twice.comps[0].clone()
    };
    let d2_psi = re_inner_field(&d2, &ev.psi);
    let dot_psi = re_inner_field(&psi_dot, &ev.psi);
    let dot_lap = re_inner_field(&psi_dot, &lap);
    let half_div_t = w.div_f(geo, &ev.tensors.t).scaled(0.5).plus(&ev.tensors.p, 1.0);
    let g_t = geo.pairing(&dir.g_dot, &half_div_t);

    let r_f = &w.r_f.data;
    let sq = &ev.psi_sq.data;
    Ok([
        ev.integrate_with(|p| rate.data[p] * r_f[p] - g_ric.data[p]),
        ev.integrate_with(|p| {
            -g_ric.data[p] * sq[p]
                + sq[p] * divdiv[p]
                + 2.0 * r_f[p] * dot_psi.data[p]
                + 4.0 * rate.data[p] * (d2_psi.data[p] - ev.grad_psi_sq.data[p])
        }),
        ev.integrate_with(|p| {
            rate.data[p] * ev.grad_psi_sq.data[p] - 2.0 * dot_lap.data[p] - g_t.data[p]
        }),
        ev.integrate_with(|p| dir.f_dot.data[p] + rate.data[p] * (ev.f.data[p] - n)),
        ev.integrate(&rate),
        ev.integrate_with(|p| 2.0 * dot_psi.data[p] + rate.data[p] * sq[p]),
    ])
}

/// Compares each integral evolution formula with a central difference of
/// the integral along the linear path.
pub fn integral_evolution_check(
    g: &Sym2Field,
    f: &ScalarField,
    psi: &SpinorField,
    k: &FlowConstants,
    dir: &VariationDirection,
    eps: f64,
) -> Result<Vec<EvolutionResidual>> {
    let ev = Evaluation::new(g, f, psi, k.tau)?;
    dir.check(ev.psi.grid())?;
    let formula = tracked_rates(&ev, dir)?;
    let at = |t: f64| -> Result<[f64; 6]> {
        let q = path_point(g, f, psi, k.tau, dir, t);
        Ok(tracked_integrals(&Evaluation::new(&q.g, &q.f, &q.psi, q.tau)?))
    };
    let (plus, minus) = (at(eps)?, at(-eps)?);
    Ok((0..6)
        .map(|i| {
            let numeric = (plus[i] - minus[i]) / (2.0 * eps);
            let residual = (numeric - formula[i]).abs();
            EvolutionResidual {
                name: TRACKED_NAMES[i].to_string(),
                numeric,
                formula: formula[i],
                residual,
                relative: residual / (formula[i].abs() + 1.0),
            }
        })
        .collect())
}

/// Residual fields of the constrained Euler–Lagrange system.
#[derive(Debug, Clone)]
pub struct ELReport {
    /// Ric + ℒ_{½∇f − V/τ}g − (2/τ)S − (λ/2τ)g.
    pub metric_residual: Sym2Field,
    /// Δ_fψ + (|∇ψ|²/c)ψ.
    pub spinor_residual: SpinorField,
    /// D_f²ψ − (β/4)ψ.
    pub eigen_residual: SpinorField,
    /// τR_f + λ(f − n) − (λ − α).
    pub scalar_residual: ScalarField,
    pub beta: f64,
    pub alpha: f64,
    /// (1 − c/τ)Ric_f − (λ/2τ)g − (2/τ)div_f T_ψ − (4/τ)⟨∇ψ⊗∇ψ⟩.
    pub soliton_residual: Sym2Field,
}

/// Sup and rms norms of the residuals, for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ELSummary {
    pub metric_max: f64,
    pub metric_rms: f64,
    pub spinor_max: f64,
    pub eigen_max: f64,
    pub scalar_max: f64,
    pub soliton_max: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ELReport {
    pub fn summary(&self) -> ELSummary {
        ELSummary {
            metric_max: self.metric_residual.max_abs(),
            metric_rms: self.metric_residual.rms(),
            spinor_max: self.spinor_residual.max_abs(),
            eigen_max: self.eigen_residual.max_abs(),
            scalar_max: self.scalar_residual.max_abs(),
            soliton_max: self.soliton_residual.max_abs(),
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

pub fn el_residuals(
    g: &Sym2Field,
    f: &ScalarField,
    psi: &SpinorField,
    k: &FlowConstants,
) -> Result<ELReport> {
    let ev = Evaluation::new(g, f, psi, k.tau)?;
    el_residuals_of(&ev, k)
}

pub fn el_residuals_of(ev: &Evaluation, k: &FlowConstants) -> Result<ELReport> {
    if !(k.c > 0.0) {
        return Err(Error::InvalidParameter(format!("c must be positive, got {}", k.c)));
    }
    let geo = ev.geo();
    let w = &ev.w;
    let (tau, lambda, c) = (k.tau, k.lambda, k.c);
    let n = ev.n() as f64;

    let lv = geo.lie_derivative_metric(&ev.tensors.v);
    let metric_residual = w
        .ric_f
        .plus(&lv, -1.0 / tau)
        .plus(&ev.tensors.s, -2.0 / tau)
        .plus(&geo.g, -lambda / (2.0 * tau));

    let lap = laplacian_of_jet(&ev.jet, &ev.sg, Some(w));
    let spinor_residual =
        lap.map_points(|p, v| v + ev.psi.at(p) * num_complex::Complex64::new(ev.grad_psi_sq.data[p] / c, 0.0));

    let beta = 4.0 / c * ev.integrate(&ev.df_psi_sq());
    let eigen_residual = ev.df_squared()?.plus(&ev.psi, -beta / 4.0);

    let combo = w.r_f.zip_map(&ev.f, |r, fv| tau * r + lambda * (fv - n) - lambda);
    let alpha = -ev.integrate(&combo) / ev.measure.total();
    let scalar_residual = combo.map(|x| x + alpha);

    let div_t = w.div_f(geo, &ev.tensors.t);
    let soliton_residual = w
        .ric_f
        .scaled(1.0 - c / tau)
        .plus(&geo.g, -lambda / (2.0 * tau))
        .plus(&div_t, -2.0 / tau)
        .plus(&ev.tensors.p, -4.0 / tau);

    Ok(ELReport {
        metric_residual,
        spinor_residual,
        eigen_residual,
        scalar_residual,
        beta,
        alpha,
        soliton_residual,
    })
}

/// ∫ { τ⟨ġ, E_g⟩ + 8Re⟨ψ̇, D_f²ψ − (β/4)ψ⟩ + (½tr ġ − ḟ)(*) } dΩ with
/// (*) = 4Re⟨D_f²ψ,ψ⟩ − β|ψ|² − τR_f − λ(f−n−1) − α.
///
/// For τ̇ = 0 directions tangent to both integral constraints this equals
/// d𝕎_λ/dt whatever α and β are.
pub fn constrained_pairing(
    ev: &Evaluation,
    k: &FlowConstants,
    report: &ELReport,
    dir: &VariationDirection,
) -> Result<f64> {
    dir.check(ev.psi.grid())?;
    let geo = ev.geo();
    let n = ev.n() as f64;
    let (tau, lambda) = (k.tau, k.lambda);
    let (alpha, beta) = (report.alpha, report.beta);
    let metric = geo.pairing(&dir.g_dot, &report.metric_residual);
    let psi_dot = parallel_velocity(ev, dir);
    let spin = re_inner_field(&psi_dot, &report.eigen_residual);
    let d2_psi = re_inner_field(&ev.df_squared()?, &ev.psi);
    let rate = measure_rate(ev, dir);
    Ok(ev.integrate_with(|p| {
        let star = 4.0 * d2_psi.data[p] - beta * ev.psi_sq.data[p] - tau * ev.w.r_f.data[p]
            - lambda * (ev.f.data[p] - n - 1.0)
            - alpha;
        tau * metric.data[p] + 8.0 * spin.data[p] + rate.data[p] * star
    }))
}

/// Projects a direction (τ̇ is zeroed) onto the tangent space of
/// {∫dΩ = const, ∫|ψ|²dΩ = const} by shifting ḟ by a constant and ψ̇ by a
/// multiple of ψ.
pub fn constraint_tangent(ev: &Evaluation, dir: &VariationDirection) -> VariationDirection {
    let mut out = dir.clone();
    out.tau_dot = 0.0;
    let rate = measure_rate(ev, &out);
    let shift = ev.integrate(&rate) / ev.measure.total();
    out.f_dot = out.f_dot.map(|x| x + shift);
    let rate = measure_rate(ev, &out);
    let dot = re_inner_field(&out.psi_dot, &ev.psi);
    let defect = ev.integrate_with(|p| 2.0 * dot.data[p] + rate.data[p] * ev.psi_sq.data[p]);
    let s = defect / (2.0 * ev.integrate(&ev.psi_sq));
    out.psi_dot = out.psi_dot.plus(&ev.psi, -s);
    out
}

/// Both sides of the two integral identities satisfied at critical points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalIdentities {
    /// ∫R_f dΩ.
    pub lhs1: f64,
    /// nλ/2τ + (4/τ)∫|D_fψ|²dΩ.
    pub rhs1: f64,
    /// (1 − c/τ)∫|D_fψ|²dΩ.
    pub lhs2: f64,
    /// ncλ/8τ + ∫|∇ψ|²dΩ.
    pub rhs2: f64,
}

pub fn critical_identities(
    g: &Sym2Field,
    f: &ScalarField,
    psi: &SpinorField,
    k: &FlowConstants,
) -> Result<CriticalIdentities> {
    let ev = Evaluation::new(g, f, psi, k.tau)?;
    Ok(critical_identities_of(&ev, k))
}

pub fn critical_identities_of(ev: &Evaluation, k: &FlowConstants) -> CriticalIdentities {
    let n = ev.n() as f64;
    let (tau, lambda, c) = (k.tau, k.lambda, k.c);
    let dfsq = ev.integrate(&ev.df_psi_sq());
    CriticalIdentities {
        lhs1: ev.integrate(&ev.w.r_f),
        rhs1: n * lambda / (2.0 * tau) + 4.0 / tau * dfsq,
        lhs2: (1.0 - c / tau) * dfsq,
        rhs2: n * c * lambda / (8.0 * tau) + ev.integrate(&ev.grad_psi_sq),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FullyForward,
    Degenerate,
    BackwardForward,
}

/// Necessary conditions on critical points in a given regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// Whether λ is compatible with the existence of critical points.
    pub lambda_admissible: bool,
    /// Degenerate regime: the forced value of ∫|∇ψ|²dΩ.
    pub grad_energy_value: Option<f64>,
    /// Backward-forward regime with λ > 0: lower bound for ∫|D_fψ|²dΩ.
    pub dirac_energy_lower_bound: Option<f64>,
    pub condition: String,
}

pub fn regime_classify(k: &FlowConstants, n: usize) -> Result<RegimeReport> {
    let (tau, lambda, c) = (k.tau, k.lambda, k.c);
    if !(tau > 0.0) || !(c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need tau > 0 and c > 0, got tau = {tau}, c = {c}"
        )));
    }
    let n = n as f64;
    let report = if (c - tau).abs() <= 1e-12 * c.max(tau) {
        let value = -n * lambda / 8.0;
        RegimeReport {
            regime: Regime::Degenerate,
            lambda_admissible: lambda <= 0.0,
            grad_energy_value: Some(value),
            dirac_energy_lower_bound: None,
            condition: format!("critical points have ∫|∇ψ|²dΩ = -nλ/8 = {value}"),
        }
    } else if c > tau {
        RegimeReport {
            regime: Regime::FullyForward,
            lambda_admissible: lambda <= 0.0,
            grad_energy_value: None,
            dirac_energy_lower_bound: None,
            condition: "critical points require λ ≤ 0; for λ = 0 they have ∇ψ = 0 and D_fψ = 0".into(),
        }
    } else {
        let bound = (lambda > 0.0).then(|| n * c * lambda / (8.0 * (tau - c)));
        RegimeReport {
            regime: Regime::BackwardForward,
            lambda_admissible: true,
            grad_energy_value: None,
            dirac_energy_lower_bound: bound,
            condition: match bound {
                Some(b) => format!("critical points require ∫|D_fψ|²dΩ ≥ ncλ/8(τ-c) = {b}"),
                None => "critical points require ncλ/8τ + ∫|∇ψ|²dΩ ≥ 0".into(),
            },
        }
    };
    Ok(report)
}
