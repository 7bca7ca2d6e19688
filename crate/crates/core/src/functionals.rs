//! The entropy 𝕎_λ and its classical restrictions, the constraint integrals,
//! and the low Dirac spectrum with the Friedrich check.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clifford::{build_rep, CliffordRep};
use crate::error::{Error, Result};
use crate::geometry::{weighted_scalar_ops, FrameGauge, GeometryCache, WeightedOps};
use crate::grid::{
    flat_integral, remove_nyquist, weighted_measure, LinearField, MeasureField, ScalarField, SpinorField, Sym2Field,
};
use crate::spinor::{
    covariant_derivative_spinor, dirac, dirac_f, dirac_of, tensors_of_jet, SpinGeometry, SpinorJet,
    SpinorTensors,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConstants {
    pub tau: f64,
    pub lambda: f64,
    pub c: f64,
}

impl FlowConstants {
    pub fn new(tau: f64, lambda: f64, c: f64) -> Result<Self> {
        if !(tau > 0.0) || !(c > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need tau > 0 and c > 0, got tau = {tau}, c = {c}, lambda = {lambda}"
            )));
        }
        Ok(Self { tau, lambda, c })
    }
}

/// Everything derived from (g, f, ψ, τ) that the functionals, variation
/// formulas and flow right-hand sides share.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub sg: SpinGeometry,
    pub w: WeightedOps,
    pub f: ScalarField,
    pub psi: SpinorField,
    pub tau: f64,
    pub jet: SpinorJet,
    pub d_psi: SpinorField,
    pub df_psi: SpinorField,
    pub tensors: SpinorTensors,
    pub measure: MeasureField,
    pub psi_sq: ScalarField,
    pub grad_psi_sq: ScalarField,
}

impl Evaluation {
    pub fn new(g: &Sym2Field, f: &ScalarField, psi: &SpinorField, tau: f64) -> Result<Self> {
        Self::with(g, f, psi, tau, &build_rep(g.grid().n())?, &FrameGauge::SymmetricRoot)
    }

    pub fn with(
        g: &Sym2Field,
        f: &ScalarField,
        psi: &SpinorField,
        tau: f64,
        rep: &CliffordRep,
        gauge: &FrameGauge,
    ) -> Result<Self> {
        g.grid().ensure_same(f.grid())?;
        g.grid().ensure_same(psi.grid())?;
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        let geo = GeometryCache::with_gauge(g, gauge)?;
        let w = weighted_scalar_ops(&geo, f)?;
        let sg = SpinGeometry::new(geo, rep.clone())?;
        let jet = covariant_derivative_spinor(psi, &sg)?;
        let d_psi = dirac_of(&jet, &sg);
        let df_psi = d_psi.plus(&sg.clifford_covector_field(&w.df, psi), -0.5);
        let tensors = tensors_of_jet(&jet, &d_psi, &df_psi, &sg, &w);
        let measure = weighted_measure(g, f, tau)?;
        let grad_psi_sq = jet.norm_sq();
        Ok(Self {
            psi_sq: psi.norm_sq(),
            sg,
            w,
            f: f.clone(),
            psi: psi.clone(),
            tau,
            jet,
            d_psi,
            df_psi,
            tensors,
            measure,
            grad_psi_sq,
        })
    }

    pub fn n(&self) -> usize {
        self.sg.n()
    }

    pub fn geo(&self) -> &GeometryCache {
        &self.sg.geo
    }

    /// ∫ φ dΩ.
    pub fn integrate(&self, phi: &ScalarField) -> f64 {
        self.measure.integrate_values(&phi.data)
    }

    pub fn integrate_with(&self, fun: impl Fn(usize) -> f64) -> f64 {
        let v: Vec<f64> = (0..self.psi.grid().len()).map(fun).collect();
        self.measure.integrate_values(&v)
    }

    /// D_f²ψ.
    pub fn df_squared(&self) -> Result<SpinorField> {
        dirac_f(&self.df_psi, &self.sg, &self.w)
    }

    /// |D_fψ|² pointwise.
    pub fn df_psi_sq(&self) -> ScalarField {
        self.df_psi.norm_sq()
    }

    /// 4|∇ψ|² + R_f(|ψ|² − τ) − λ(f − n) pointwise.
    pub fn w_density(&self, lambda: f64) -> ScalarField {
        let n = self.n() as f64;
        let data = (0..self.f.data.len())
            .map(|p| {
                4.0 * self.grad_psi_sq.data[p] + self.w.r_f.data[p] * (self.psi_sq.data[p] - self.tau)
                    - lambda * (self.f.data[p] - n)
            })
            .collect();
        ScalarField::new(*self.f.grid(), data).expect("grid-sized data")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub w_lambda: f64,
    pub w_lambda_dirac_form: f64,
    pub perelman_f: f64,
    pub perelman_w: f64,
    pub bo_e: f64,
    pub mass: f64,
    pub spinor_mass: f64,
}

/// 𝕎_λ = ∫ {4|∇ψ|² + R_f(|ψ|² − τ) − λ(f − n)} dΩ.
pub fn w_lambda(g: &Sym2Field, f: &ScalarField, psi: &SpinorField, k: &FlowConstants) -> Result<f64> {
    Ok(w_lambda_of(&Evaluation::new(g, f, psi, k.tau)?, k.lambda))
}

pub fn w_lambda_of(ev: &Evaluation, lambda: f64) -> f64 {
    ev.integrate(&ev.w_density(lambda))
}

/// ∫ {4|D_fψ|² − τ(R + |∇f|²) − λ(f − n)} dΩ, equal to 𝕎_λ after integration by parts.
pub fn w_lambda_dirac_form_of(ev: &Evaluation, lambda: f64) -> f64 {
    let n = ev.n() as f64;
    let geo = ev.geo();
    ev.integrate_with(|p| {
        4.0 * ev.df_psi.at(p).norm_squared()
            - ev.tau * (geo.scalar.data[p] + ev.w.grad_f_sq.data[p])
            - lambda * (ev.f.data[p] - n)
    })
}

/// Perelman's ℱ = ∫ R_f e^{-f} dμ and 𝒲 = (4πτ)^{-n/2} ∫ {τ(R + |∇f|²) + f − n} e^{-f} dμ.
pub fn classical_functionals(g: &Sym2Field, f: &ScalarField, tau: f64) -> Result<(f64, f64)> {
    let psi = SpinorField::zeros(*g.grid());
    let ev = Evaluation::new(g, f, &psi, tau)?;
    Ok(classical_of(&ev))
}

fn unnormalized(ev: &Evaluation, fun: impl Fn(usize) -> f64) -> f64 {
    let geo = ev.geo();
    let v: Vec<f64> = (0..ev.f.data.len())
        .map(|p| fun(p) * (-ev.f.data[p]).exp() * geo.sqrt_det[p])
        .collect();
    flat_integral(ev.f.grid(), &v)
}

fn classical_of(ev: &Evaluation) -> (f64, f64) {
    let n = ev.n() as f64;
    let geo = ev.geo();
    let big_f = unnormalized(ev, |p| ev.w.r_f.data[p]);
    let big_w = (4.0 * std::f64::consts::PI * ev.tau).powf(-n / 2.0)
        * unnormalized(ev, |p| {
            ev.tau * (geo.scalar.data[p] + ev.w.grad_f_sq.data[p]) + ev.f.data[p] - n
        });
    (big_f, big_w)
}

/// ℰ = ∫ {4|∇ψ|² + R_f(|ψ|² − 1)} e^{-f} dμ.
pub fn bo_energy(g: &Sym2Field, f: &ScalarField, psi: &SpinorField) -> Result<f64> {
    Ok(bo_energy_of(&Evaluation::new(g, f, psi, 1.0)?))
}

pub fn bo_energy_of(ev: &Evaluation) -> f64 {
    unnormalized(ev, |p| {
        4.0 * ev.grad_psi_sq.data[p] + ev.w.r_f.data[p] * (ev.psi_sq.data[p] - 1.0)
    })
}

/// Dirac form of ℰ: ∫ 4|D_fψ|² e^{-f} dμ − ℱ.
pub fn bo_energy_dirac_form_of(ev: &Evaluation) -> f64 {
    unnormalized(ev, |p| 4.0 * ev.df_psi.at(p).norm_squared()) - classical_of(ev).0
}

/// (∫ dΩ, ∫ |ψ|² dΩ).
pub fn constraint_integrals(
    g: &Sym2Field,
    f: &ScalarField,
    psi: &SpinorField,
    k: &FlowConstants,
) -> Result<(f64, f64)> {
    let m = weighted_measure(g, f, k.tau)?;
    Ok((m.total(), m.integrate_values(&psi.norm_sq().data)))
}

pub fn report(g: &Sym2Field, f: &ScalarField, psi: &SpinorField, k: &FlowConstants) -> Result<FunctionalReport> {
    let ev = Evaluation::new(g, f, psi, k.tau)?;
    Ok(report_of(&ev, k.lambda))
}

pub fn report_of(ev: &Evaluation, lambda: f64) -> FunctionalReport {
    let (perelman_f, perelman_w) = classical_of(ev);
    FunctionalReport {
        w_lambda: w_lambda_of(ev, lambda),
        w_lambda_dirac_form: w_lambda_dirac_form_of(ev, lambda),
        perelman_f,
        perelman_w,
        bo_e: bo_energy_of(ev),
        mass: ev.measure.total(),
        spinor_mass: ev.integrate(&ev.psi_sq),
    }
}

// ---------------------------------------------------------------------------
// Dirac spectrum

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Shift σ in the inverse iteration on D² + σ.
    pub shift: f64,
    pub max_outer: usize,
    pub max_cg: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            shift: 1.0,
            max_outer: 200,
            max_cg: 2000,
            tol: 1e-10,
            seed: 7,
        }
    }
}

struct DiracSquared<'a> {
    sg: &'a SpinGeometry,
    weight: Vec<f64>,
}

impl DiracSquared<'_> {
    fn apply(&self, x: &SpinorField, shift: f64) -> SpinorField {
        let d = dirac(x, self.sg).expect("consistent grid");
        dirac(&d, self.sg).expect("consistent grid").plus(x, shift)
    }

    /// ⟨a, b⟩ in L²(dμ_g), complex.
    fn dot(&self, a: &SpinorField, b: &SpinorField) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for p in 0..self.weight.len() {
            s += a.at(p).dotc(&b.at(p)) * self.weight[p];
        }
        s
    }

    fn norm(&self, a: &SpinorField) -> f64 {
        self.dot(a, a).re.sqrt()
    }

    fn axpy(a: &SpinorField, alpha: Complex64, b: &SpinorField) -> SpinorField {
        let mut out = a.clone();
        for k in 0..2 {
            for (o, v) in out.comps[k].iter_mut().zip(&b.comps[k]) {
                *o += alpha * v;
            }
        }
        out
    }

    /// Σ conj(a)·b dμ_g, written out so the conjugation side is explicit.
    fn cdot(&self, a: &SpinorField, b: &SpinorField) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for k in 0..2 {
            for ((x, y), w) in a.comps[k].iter().zip(&b.comps[k]).zip(&self.weight) {
                s += x.conj() * y * w;
            }
        }
        s
    }

    /// Solves (D² + σ)x = b by BiCGSTAB. The discrete D² is Hermitian only up
    /// to aliasing error (about 1e-4 relative at res 16 on curved metrics),
    /// which is enough to stall plain conjugate gradients.
    fn solve(&self, b: &SpinorField, opts: &EigenOptions) -> Result<SpinorField> {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let mut x = SpinorField::zeros(*b.grid());
        let mut r = b.clone();
        let r_hat = b.clone();
        let target = opts.tol * self.norm(b).max(f64::MIN_POSITIVE);
        let (mut rho, mut alpha, mut omega) = (one, one, one);
        let mut v = SpinorField::zeros(*b.grid());
        let mut p = SpinorField::zeros(*b.grid());
        for _ in 0..opts.max_cg {
            if self.norm(&r) <= target {
                return Ok(x);
            }
            let rho_new = self.cdot(&r_hat, &r);
            if rho_new == zero || omega == zero {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            p = Self::axpy(&r, beta, &Self::axpy(&p, -omega, &v));
            v = self.apply(&p, opts.shift);
            alpha = rho_new / self.cdot(&r_hat, &v);
            x = Self::axpy(&x, alpha, &p);
            let s = Self::axpy(&r, -alpha, &v);
            if self.norm(&s) <= target {
                return Ok(x);
            }
            let t = self.apply(&s, opts.shift);
            omega = self.cdot(&t, &s) / self.cdot(&t, &t);
            x = Self::axpy(&x, omega, &s);
            r = Self::axpy(&s, -omega, &t);
            rho = rho_new;
        }
        if self.norm(&r) <= 1e2 * target {
            return Ok(x);
        }
        Err(Error::NoConvergence {
            what: "BiCGSTAB for D² + σ",
            iterations: opts.max_cg,
        })
    }

    fn band_limit(mut x: SpinorField) -> SpinorField {
        let grid = *x.grid();
        for comp in x.comps.iter_mut() {
            remove_nyquist(&grid, comp);
        }
        x
    }

    /// Gram–Schmidt (twice) in L²(dμ_g).
    fn orthonormalize(&self, block: &mut [SpinorField]) {
        for _ in 0..2 {
            for i in 0..block.len() {
                for j in 0..i {
                    let c = self.dot(&block[j], &block[i]);
                    block[i] = Self::axpy(&block[i], -c, &block[j]);
                }
                let nrm = self.norm(&block[i]);
                block[i] = block[i].scaled(1.0 / nrm);
            }
        }
    }
}

/// The `count` smallest eigenvalues of |D| (with multiplicity over C), by
/// block inverse iteration on D² + σ with Rayleigh–Ritz in L²(dμ_g),
/// restricted to fields without Nyquist modes.
///
/// Deflating converged vectors one at a time does not work here: the kernel
/// is degenerate, and any error in the locked vectors leaves a spurious
/// near-zero mode in the deflated operator.
pub fn dirac_low_spectrum(g: &Sym2Field, count: usize, opts: &EigenOptions) -> Result<Vec<f64>> {
    let geo = GeometryCache::new(g)?;
    let rep = build_rep(g.grid().n())?;
    let sg = SpinGeometry::new(geo, rep)?;
    let op = DiracSquared {
        weight: sg.geo.sqrt_det.iter().map(|v| v * g.grid().cell_volume()).collect(),
        sg: &sg,
    };
    let mut rng = crate::random::BandLimited::new(*g.grid(), opts.seed, (g.grid().res() / 2 - 1).min(6))?;
    let size = count + 2;
    let mut block: Vec<SpinorField> = (0..size).map(|_| rng.spinor(1.0)).collect();
    op.orthonormalize(&mut block);
    let mut prev = vec![f64::NAN; count];
    for _ in 0..opts.max_outer {
        let mut next = block
            .iter()
            .map(|v| op.solve(v, opts).map(DiracSquared::band_limit))
            .collect::<Result<Vec<_>>>()?;
        op.orthonormalize(&mut next);
        let images: Vec<SpinorField> = next.iter().map(|v| op.apply(v, 0.0)).collect();
        let h = DMatrix::from_fn(size, size, |i, j| op.dot(&next[i], &images[j]));
        let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        block = order
            .iter()
            .map(|&k| {
                (0..size).fold(SpinorField::zeros(*g.grid()), |acc, i| {
                    DiracSquared::axpy(&acc, eig.eigenvectors[(i, k)], &next[i])
                })
            })
            .collect();
        let mu: Vec<f64> = order.iter().take(count).map(|&k| eig.eigenvalues[k]).collect();
        let settled = mu.iter().zip(&prev).all(|(m, p)| (m - p).abs() <= opts.tol * (1.0 + m.abs()));
        let resid = (0..count)
            .map(|k| {
                let r = DiracSquared::band_limit(op.apply(&block[k], 0.0).plus(&block[k], -mu[k]));
                op.norm(&r) / (1.0 + mu[k].abs())
            })
            .fold(0.0, f64::max);
        prev = mu;
        if settled && resid <= opts.tol.sqrt() {
            return Ok(prev.iter().map(|m| m.max(0.0).sqrt()).collect());
        }
    }
    Err(Error::NoConvergence {
        what: "inverse iteration for the Dirac spectrum",
        iterations: opts.max_outer,
    })
}

pub fn dirac_lambda1(g: &Sym2Field, opts: &EigenOptions) -> Result<f64> {
    Ok(dirac_low_spectrum(g, 1, opts)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedrichCheck {
    pub lambda1: f64,
    pub min_r_f: f64,
    /// n/(4(n−1)) · min R_f.
    pub bound: f64,
    pub holds: bool,
}

/// λ₁(D)² ≥ n/(4(n−1)) min R_f.
pub fn friedrich_check(g: &Sym2Field, f: &ScalarField, opts: &EigenOptions) -> Result<FriedrichCheck> {
    let n = g.grid().n() as f64;
    let geo = GeometryCache::new(g)?;
    let w = weighted_scalar_ops(&geo, f)?;
    let lambda1 = dirac_lambda1(g, opts)?;
    let min_r_f = w.r_f.min();
    let bound = n / (4.0 * (n - 1.0)) * min_r_f;
    Ok(FriedrichCheck {
        lambda1,
        min_r_f,
        bound,
        holds: lambda1 * lambda1 >= bound - 1e-9 * (1.0 + bound.abs()),
    })
}
