//! Principal symbols of the linearized flow operators at constant-coefficient
//! backgrounds (g = δ, f and ψ constant).
//!
//! Convention: σ_ξ(∂_a∂_b) = −ξ_aξ_b, so a second-order operator L applied
//! to u·sin(2πN ξ·x) returns (2πN)² σ_ξ(L)u · sin(2πN ξ·x) up to lower order.
//!
//! Two families of closed forms are provided. `SymbolForm::Printed` follows
//! the displayed lemmas literally. `SymbolForm::Corrected` is the symbol of
//! the operators as implemented, where the Kosmann derivative is
//! ℒ_Xψ = ∇_Xψ − ¼ Σ_{a<b}(∇_aX_b − ∇_bX_a) e_a·e_b·ψ. The two differ only
//! for the Kosmann terms; the numeric probe decides between them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clifford::{re_inner, CliffordRep, M2};
use crate::error::{Error, Result};
use crate::flow::{apply_a, gauged_rhs_of, AForm};
use crate::functionals::{Evaluation, FlowConstants};
use crate::geometry::{deturck_vector, GeometryCache};
use crate::grid::{Grid, ScalarField, Spinor, SpinorField, TensorField};
use crate::linalg::{spd_parts, Mat3};
use crate::spinor::{kosmann_lie, laplacian_of_jet};
use crate::variation::Regime;

fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Frequency ξ, metric direction η, spinor direction s, scalar direction h
/// and the constant background spinor ψ (with |ψ|² playing the role of c).
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolProbe {
    pub xi: Vec<f64>,
    pub eta: Mat3,
    pub s: Spinor,
    pub h: f64,
    pub psi: Spinor,
    pub tau: f64,
}

impl SymbolProbe {
    pub fn new(xi: Vec<f64>, eta: Mat3, s: Spinor, h: f64, psi: Spinor, tau: f64) -> Result<Self> {
        let n = xi.len();
        if n != 2 && n != 3 {
            return Err(Error::UnsupportedDimension(n));
        }
        if !(xi.iter().map(|x| x * x).sum::<f64>() > 0.0) {
            return Err(Error::InvalidParameter("xi must be nonzero".into()));
        }
        for a in 0..n {
            for b in 0..n {
                if (eta[a][b] - eta[b][a]).abs() > 1e-14 * (1.0 + eta[a][b].abs()) {
                    return Err(Error::InvalidParameter("eta must be symmetric".into()));
                }
            }
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        Ok(Self { xi, eta, s, h, psi, tau })
    }

    /// Random probe with |ψ|² = c. With `tangent`, s is projected so that
    /// Re⟨ψ, s⟩ = 0. `xi`, when given, replaces the random frequency.
    pub fn random(n: usize, seed: u64, c: f64, tau: f64, tangent: bool, xi: Option<&[f64]>) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = || -> f64 { rng.random_range(-1.0..1.0) };
        let xi = match xi {
            Some(x) => x.to_vec(),
            None => (0..n).map(|_| u()).collect(),
        };
        let mut eta = [[0.0; 3]; 3];
        for a in 0..n {
            for b in a..n {
                eta[a][b] = u();
                eta[b][a] = eta[a][b];
            }
        }
        let mut psi = Spinor::new(Complex64::new(u(), u()), Complex64::new(u(), u()));
        psi *= cr((c / psi.norm_squared()).sqrt());
        let mut s = Spinor::new(Complex64::new(u(), u()), Complex64::new(u(), u()));
        if tangent {
            s -= psi * cr(re_inner(&psi, &s) / psi.norm_squared());
        }
        let h = u();
        Self::new(xi, eta, s, h, psi, tau)
    }

    pub fn n(&self) -> usize {
        self.xi.len()
    }

    fn xi_sq(&self) -> f64 {
        self.xi.iter().map(|x| x * x).sum()
    }

    fn eta_xi(&self) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|a| (0..n).map(|i| self.eta[a][i] * self.xi[i]).sum()).collect()
    }

    fn tr_eta(&self) -> f64 {
        (0..self.n()).map(|a| self.eta[a][a]).sum()
    }

    fn eta_xi_xi(&self) -> f64 {
        self.eta_xi().iter().zip(&self.xi).map(|(a, b)| a * b).sum()
    }

    fn psi_sq(&self) -> f64 {
        self.psi.norm_squared()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolForm {
    Printed,
    Corrected,
}

/// Value of a symbol: scalar, symmetric matrix, or spinor.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolValue {
    Scalar(f64),
    Matrix { n: usize, m: Mat3 },
    Spinor(Spinor),
}

impl SymbolValue {
    pub fn components(&self) -> Vec<f64> {
        match self {
            Self::Scalar(x) => vec![*x],
            Self::Matrix { n, m } => (0..*n).flat_map(|a| (0..*n).map(move |b| m[a][b])).collect(),
            Self::Spinor(s) => vec![s[0].re, s[0].im, s[1].re, s[1].im],
        }
    }

    pub fn norm(&self) -> f64 {
        self.components().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &SymbolValue) -> f64 {
        let a = self.components();
        let b = other.components();
        if a.len() != b.len() {
            return f64::INFINITY;
        }
        a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorTag {
    Ric,
    R,
    LieW,
    KosmannU,
    KosmannW,
    LapSpinor,
    DivU,
    GaugedMetric,
    GaugedSpinor,
}

impl OperatorTag {
    pub const ALL: [OperatorTag; 9] = [
        Self::Ric,
        Self::R,
        Self::LieW,
        Self::KosmannU,
        Self::KosmannW,
        Self::LapSpinor,
        Self::DivU,
        Self::GaugedMetric,
        Self::GaugedSpinor,
    ];
}

// ---------------------------------------------------------------------------
// Closed forms

/// Σ_{i,j≠k} weight(i,j,k) for the recurring restricted triple sums.
fn sum_jk<T: std::ops::AddAssign + Default>(n: usize, mut term: impl FnMut(usize, usize, usize) -> T) -> T {
    let mut acc = T::default();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    acc += term(i, j, k);
                }
            }
        }
    }
    acc
}

/// coef · Σ_{a,b}(ξ_aL_b − ξ_bL_a) e_a·e_b·ψ.
fn curl_action(p: &SymbolProbe, rep: &CliffordRep, l: &[f64], coef: f64) -> Spinor {
    let n = p.n();
    let g = rep.gammas();
    let mut m = M2::zeros();
    for a in 0..n {
        for b in 0..n {
            let w = p.xi[a] * l[b] - p.xi[b] * l[a];
            if w != 0.0 {
                m += g[a] * g[b] * cr(coef * w);
            }
        }
    }
    m * p.psi
}

/// Metric-block symbols (Ric, R, ℒ_W g) as displayed; they hold as printed.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBlock {
    pub ric: Mat3,
    pub r: f64,
    pub lie_w: Mat3,
}

pub fn symbol_metric_block(p: &SymbolProbe) -> MetricBlock {
    let n = p.n();
    let x2 = p.xi_sq();
    let ex = p.eta_xi();
    let tr = p.tr_eta();
    let mut ric = [[0.0; 3]; 3];
    let mut lie_w = [[0.0; 3]; 3];
    for a in 0..n {
        for b in 0..n {
            let k = p.xi[a] * ex[b] + p.xi[b] * ex[a] - p.xi[a] * p.xi[b] * tr;
            ric[a][b] = 0.5 * x2 * p.eta[a][b] - 0.5 * k;
            lie_w[a][b] = -k;
        }
    }
    MetricBlock {
        ric,
        r: x2 * tr - p.eta_xi_xi(),
        lie_w,
    }
}

/// Spinor-block symbols: Kosmann along U and W, spinor Laplacian, div U.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorBlock {
    pub kosmann_u: Spinor,
    pub kosmann_w: Spinor,
    pub lap: Spinor,
    pub div_u: f64,
}

/// First-order symbol of U = Σ_b Re⟨ψ, e_b·Dψ⟩e_b in the direction (η, s).
fn u_first_order(p: &SymbolProbe, rep: &CliffordRep) -> (Vec<f64>, Vec<f64>) {
    let n = p.n();
    let g = rep.gammas();
    let xs = rep.vector_matrix(&p.xi) * p.s;
    let from_s: Vec<f64> = (0..n).map(|b| re_inner(&p.psi, &(g[b] * xs))).collect();
    let from_eta: Vec<f64> = (0..n)
        .map(|b| {
            0.25 * sum_jk(n, |i, j, k| {
                p.xi[j] * p.eta[i][k] * re_inner(&p.psi, &(g[b] * g[i] * g[j] * g[k] * p.psi))
            })
        })
        .collect();
    (from_eta, from_s)
}

pub fn symbol_kosmann_u(p: &SymbolProbe, rep: &CliffordRep, form: SymbolForm) -> Spinor {
    let (le, ls) = u_first_order(p, rep);
    match form {
        SymbolForm::Printed => curl_action(p, rep, &le, -0.25) + curl_action(p, rep, &ls, 0.25),
        SymbolForm::Corrected => {
            let l: Vec<f64> = le.iter().zip(&ls).map(|(a, b)| a + b).collect();
            curl_action(p, rep, &l, 0.125)
        }
    }
}

pub fn symbol_kosmann_w(p: &SymbolProbe, rep: &CliffordRep, form: SymbolForm) -> Spinor {
    let ex = p.eta_xi();
    match form {
        SymbolForm::Printed => curl_action(p, rep, &ex, -0.25),
        SymbolForm::Corrected => {
            // W linearizes to ξ_iη_ib − ½ξ_b tr η; the gradient part has no curl.
            let tr = p.tr_eta();
            let l: Vec<f64> = ex.iter().zip(&p.xi).map(|(e, x)| e - 0.5 * x * tr).collect();
            curl_action(p, rep, &l, 0.125)
        }
    }
}

pub fn symbol_lap(p: &SymbolProbe, rep: &CliffordRep) -> Spinor {
    let n = p.n();
    let g = rep.gammas();
    let m: M2 = sum_jk(n, |i, j, k| g[j] * g[k] * cr(p.xi[i] * p.xi[j] * p.eta[i][k]));
    m * p.psi * cr(-0.25) - p.s * cr(p.xi_sq())
}

pub fn symbol_div_u(p: &SymbolProbe, rep: &CliffordRep) -> f64 {
    let n = p.n();
    let g = rep.gammas();
    let c = p.psi_sq();
    0.25 * sum_jk(n, |i, j, k| p.xi[i] * p.xi[j] * p.eta[i][k] * re_inner(&p.psi, &(g[j] * g[k] * p.psi)))
        + p.xi_sq() * re_inner(&p.psi, &p.s)
        + 0.25 * p.xi_sq() * p.tr_eta() * c
        - 0.25 * p.eta_xi_xi() * c
}

pub fn symbol_spinor_block(p: &SymbolProbe, rep: &CliffordRep, form: SymbolForm) -> SpinorBlock {
    SpinorBlock {
        kosmann_u: symbol_kosmann_u(p, rep, form),
        kosmann_w: symbol_kosmann_w(p, rep, form),
        lap: symbol_lap(p, rep),
        div_u: symbol_div_u(p, rep),
    }
}

/// Closed form for one operator.
pub fn closed_form(tag: OperatorTag, p: &SymbolProbe, rep: &CliffordRep, form: SymbolForm) -> SymbolValue {
    let n = p.n();
    match tag {
        OperatorTag::Ric => SymbolValue::Matrix { n, m: symbol_metric_block(p).ric },
        OperatorTag::R => SymbolValue::Scalar(symbol_metric_block(p).r),
        OperatorTag::LieW => SymbolValue::Matrix { n, m: symbol_metric_block(p).lie_w },
        OperatorTag::KosmannU => SymbolValue::Spinor(symbol_kosmann_u(p, rep, form)),
        OperatorTag::KosmannW => SymbolValue::Spinor(symbol_kosmann_w(p, rep, form)),
        OperatorTag::LapSpinor => SymbolValue::Spinor(symbol_lap(p, rep)),
        OperatorTag::DivU => SymbolValue::Scalar(symbol_div_u(p, rep)),
        OperatorTag::GaugedMetric => {
            let mut m = [[0.0; 3]; 3];
            for a in 0..n {
                for b in 0..n {
                    m[a][b] = -p.xi_sq() * p.eta[a][b];
                }
            }
            SymbolValue::Matrix { n, m }
        }
        OperatorTag::GaugedSpinor => SymbolValue::Spinor(
            symbol_lap(p, rep) + symbol_kosmann_w(p, rep, form)
                - symbol_kosmann_u(p, rep, form) * cr(2.0 / p.tau),
        ),
    }
}

// ---------------------------------------------------------------------------
// Pairing identities for tangent directions Re⟨ψ, s⟩ = 0

/// Left and right sides of the four pairing identities, evaluated from the
/// printed spinor-block symbols: ⟨σ(ℒ_U), s⟩, ⟨σ(ℒ_W), s⟩, ⟨σ(Δ), s⟩ and
/// σ(div U)·h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingIdentities {
    pub lhs: [f64; 4],
    pub rhs: [f64; 4],
}

impl PairingIdentities {
    pub fn max_residual(&self) -> f64 {
        (0..4).map(|i| (self.lhs[i] - self.rhs[i]).abs()).fold(0.0, f64::max)
    }
}

pub fn pairing_identities(p: &SymbolProbe, rep: &CliffordRep) -> PairingIdentities {
    let block = symbol_spinor_block(p, rep, SymbolForm::Printed);
    let c = p.psi_sq();
    let two_form = rep.two_form_matrix(&p.eta_xi(), &p.xi);
    let b = re_inner(&p.psi, &(two_form * p.s));
    let xs = rep.vector_matrix(&p.xi) * p.s;
    let r2: f64 = rep.gammas().iter().map(|g| re_inner(&p.psi, &(g * xs)).powi(2)).sum();
    let s2 = p.s.norm_squared();
    PairingIdentities {
        lhs: [
            re_inner(&block.kosmann_u, &p.s),
            re_inner(&block.kosmann_w, &p.s),
            re_inner(&block.lap, &p.s),
            block.div_u * p.h,
        ],
        rhs: [
            -0.125 * c * b + 0.5 * r2,
            -0.5 * b,
            -0.25 * b - p.xi_sq() * s2,
            0.25 * (p.xi_sq() * p.tr_eta() - p.eta_xi_xi()) * p.h * c,
        ],
    }
}

// ---------------------------------------------------------------------------
// Numeric extraction

/// Grid resolution and differencing amplitude for the probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    /// Grid resolution; `None` picks the smallest admissible one.
    pub res: Option<usize>,
    pub eps: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { res: None, eps: 1e-4 }
    }
}

enum OutputField {
    Scalar(ScalarField),
    Tensor(TensorField),
    Spinor(SpinorField),
}

fn evaluate_operator(
    tag: OperatorTag,
    g: &TensorField,
    f: &ScalarField,
    psi: &SpinorField,
    probe: &SymbolProbe,
) -> Result<OutputField> {
    let grid = *g.grid();
    let flat = TensorField::identity_metric(grid);
    match tag {
        OperatorTag::Ric | OperatorTag::R | OperatorTag::LieW => {
            let geo = GeometryCache::new(g)?;
            Ok(match tag {
                OperatorTag::Ric => OutputField::Tensor(geo.ric.clone()),
                OperatorTag::R => OutputField::Scalar(geo.scalar.clone()),
                _ => OutputField::Tensor(geo.lie_derivative_metric(&deturck_vector(g, &flat)?)),
            })
        }
        _ => {
            let ev = Evaluation::new(g, f, psi, probe.tau)?;
            Ok(match tag {
                OperatorTag::KosmannU => OutputField::Spinor(kosmann_lie(&ev.tensors.u, psi, &ev.sg)?),
                OperatorTag::KosmannW => OutputField::Spinor(kosmann_lie(&deturck_vector(g, &flat)?, psi, &ev.sg)?),
                OperatorTag::LapSpinor => OutputField::Spinor(laplacian_of_jet(&ev.jet, &ev.sg, None)),
                OperatorTag::DivU => OutputField::Scalar(ev.geo().divergence_vector(&ev.tensors.u)),
                _ => {
                    let k = FlowConstants::new(probe.tau, 0.0, probe.psi_sq())?;
                    let rhs = gauged_rhs_of(&ev, &GeometryCache::new(&flat)?, &k)?;
                    if tag == OperatorTag::GaugedMetric {
                        OutputField::Tensor(rhs.g_dot)
                    } else {
                        OutputField::Spinor(rhs.psi_dot_parallel)
                    }
                }
            })
        }
    }
}

/// Extracts σ_ξ of the linearized operator by central differencing at
/// amplitude ε on the perturbation (η, h, s)·sin(2πN ξ·x) about
/// (δ, f₀, ψ), then projecting onto the probe harmonic.
///
/// N·ξ must be an integer vector with |N ξ_i| ≤ res/4.
pub fn numeric_symbol_probe(tag: OperatorTag, p: &SymbolProbe, nfreq: usize, opts: ProbeOptions) -> Result<SymbolValue> {
    let n = p.n();
    if !(1e-7..=1e-2).contains(&opts.eps) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {} outside the stable bracket [1e-7, 1e-2]",
            opts.eps
        )));
    }
    let mut kvec = [0i64; 3];
    for a in 0..n {
        let k = nfreq as f64 * p.xi[a];
        if (k - k.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "N·xi must be an integer vector for a periodic probe, got component {k}"
            )));
        }
        kvec[a] = k.round() as i64;
    }
    let kmax = kvec.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0);
    let res = match opts.res {
        Some(r) => r,
        None => (4 * kmax).next_power_of_two().max(16),
    };
    let grid = Grid::new(n, res)?;
    if 4 * kmax > res {
        return Err(Error::BandLimitTooLarge { kmax, half: res / 2 });
    }
    let phase: Vec<f64> = (0..grid.len())
        .map(|q| {
            let x = grid.position(q);
            (2.0 * PI * (0..n).map(|a| kvec[a] as f64 * x[a]).sum::<f64>()).sin()
        })
        .collect();
    let f0 = -(n as f64 / 2.0) * (4.0 * PI * p.tau).ln();
    let field_at = |sign: f64| -> Result<OutputField> {
        let amp = sign * opts.eps;
        let mut g = TensorField::identity_metric(grid);
        for a in 0..n {
            for b in 0..n {
                for (q, v) in g.comps[a * n + b].iter_mut().enumerate() {
                    *v += amp * p.eta[a][b] * phase[q];
                }
            }
        }
        let f = ScalarField::new(grid, phase.iter().map(|ph| f0 + amp * p.h * ph).collect())?;
        let psi = SpinorField::from_fn_indexed(grid, |q| p.psi + p.s * cr(amp * phase[q]));
        evaluate_operator(tag, &g, &f, &psi, p)
    };
    let plus = field_at(1.0)?;
    let minus = field_at(-1.0)?;
    let scale = 1.0 / (2.0 * opts.eps * (2.0 * PI * nfreq as f64).powi(2));
    let project = |a: &[f64], b: &[f64]| -> f64 {
        2.0 * a.iter().zip(b).zip(&phase).map(|((x, y), ph)| (x - y) * ph).sum::<f64>() / grid.len() as f64
            * scale
    };
    Ok(match (plus, minus) {
        (OutputField::Scalar(a), OutputField::Scalar(b)) => SymbolValue::Scalar(project(&a.data, &b.data)),
        (OutputField::Tensor(a), OutputField::Tensor(b)) => {
            let mut m = [[0.0; 3]; 3];
            for i in 0..n {
                for j in 0..n {
                    m[i][j] = project(&a.comps[i * n + j], &b.comps[i * n + j]);
                }
            }
            SymbolValue::Matrix { n, m }
        }
        (OutputField::Spinor(a), OutputField::Spinor(b)) => {
            let mut out = Spinor::zeros();
            for c in 0..2 {
                let part = |f: fn(&Complex64) -> f64| -> (Vec<f64>, Vec<f64>) {
                    (a.comps[c].iter().map(f).collect(), b.comps[c].iter().map(f).collect())
                };
                let (ar, br) = part(|z| z.re);
                let (ai, bi) = part(|z| z.im);
                out[c] = Complex64::new(project(&ar, &br), project(&ai, &bi));
            }
            SymbolValue::Spinor(out)
        }
        _ => unreachable!("both sides come from the same operator"),
    })
}

/// One line of the symbol-comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolComparison {
    pub operator: OperatorTag,
    pub form: SymbolForm,
    pub closed_form: Vec<f64>,
    pub extracted: Vec<f64>,
    /// |extracted − closed| / |closed|, or the absolute error when the
    /// closed form vanishes.
    pub rel_error: f64,
    pub n_freq: usize,
    pub epsilon: f64,
}

pub fn compare_symbol(
    tag: OperatorTag,
    p: &SymbolProbe,
    rep: &CliffordRep,
    form: SymbolForm,
    nfreq: usize,
    opts: ProbeOptions,
) -> Result<SymbolComparison> {
    let extracted = numeric_symbol_probe(tag, p, nfreq, opts)?;
    let closed = closed_form(tag, p, rep, form);
    let scale = closed.norm();
    let err = extracted.distance(&closed);
    Ok(SymbolComparison {
        operator: tag,
        form,
        closed_form: closed.components(),
        extracted: extracted.components(),
        rel_error: if scale > 1e-12 { err / scale } else { err },
        n_freq: nfreq,
        epsilon: opts.eps,
    })
}

// ---------------------------------------------------------------------------
// The endomorphism A(ψ) and parabolicity

/// Real-linear blocks A^{kl}, indexed `[k * n + l]`, acting on
/// (Re s₁, Im s₁, Re s₂, Im s₂).
#[derive(Debug, Clone, PartialEq)]
pub struct EndomorphismBlock {
    pub n: usize,
    pub form: AForm,
    pub blocks: Vec<Matrix4<f64>>,
    /// g^{kl} of the background, for normalizing |ξ|².
    pub g_inv: Mat3,
}

fn to_real(s: &Spinor) -> [f64; 4] {
    [s[0].re, s[0].im, s[1].re, s[1].im]
}

fn from_real(v: &[f64]) -> Spinor {
    Spinor::new(Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3]))
}

pub fn a_endomorphism(psi: &Spinor, rep: &CliffordRep, tau: f64, g: &Mat3, form: AForm) -> Result<EndomorphismBlock> {
    let n = rep.n();
    let parts = spd_parts(g, n, 0)?;
    // e^k acts through Σ_a (g^{-1/2})^k_a γ_a
    let gu: Vec<M2> = (0..n)
        .map(|k| rep.vector_matrix(&(0..n).map(|a| parts.inv_sqrt[k][a]).collect::<Vec<_>>()))
        .collect();
    let mut blocks = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            let mut m = Matrix4::zeros();
            for col in 0..4 {
                let mut e = [0.0; 4];
                e[col] = 1.0;
                let out = apply_a(form, psi, &from_real(&e), k, l, parts.inverse[k][l], &gu, rep.gammas(), tau);
                for (row, v) in to_real(&out).iter().enumerate() {
                    m[(row, col)] = *v;
                }
            }
            blocks.push(m);
        }
    }
    Ok(EndomorphismBlock {
        n,
        form,
        blocks,
        g_inv: parts.inverse,
    })
}

impl EndomorphismBlock {
    /// Σ_{kl} ξ_kξ_l A^{kl}.
    pub fn contract(&self, xi: &[f64]) -> Matrix4<f64> {
        let n = self.n;
        let mut m = Matrix4::zeros();
        for k in 0..n {
            for l in 0..n {
                m += self.blocks[k * n + l] * (xi[k] * xi[l]);
            }
        }
        m
    }

    /// Re⟨A^{kl}ξ_kξ_l s, s⟩.
    pub fn quadratic_form(&self, xi: &[f64], s: &Spinor) -> f64 {
        let v = nalgebra::Vector4::from(to_real(s));
        v.dot(&(self.contract(xi) * v))
    }

    pub fn xi_norm_sq(&self, xi: &[f64]) -> f64 {
        let n = self.n;
        (0..n).flat_map(|k| (0..n).map(move |l| (k, l))).map(|(k, l)| self.g_inv[k][l] * xi[k] * xi[l]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub form: AForm,
    /// min over sampled ξ and all s of Re⟨A(ξ,ξ)s, s⟩ / (|ξ|²|s|²).
    pub coercivity: f64,
    /// The same minimum over s with Re⟨ψ, s⟩ = 0.
    pub tangent_coercivity: f64,
    pub worst_xi: Vec<f64>,
    /// Whether Re⟨A(ξ,ξ)s, s⟩ ≥ |ξ|²|s|² for every sample.
    pub coercive: bool,
}

fn unit_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    if n == 2 {
        (0..count)
            .map(|i| {
                let t = PI * i as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()
    } else {
        // Fibonacci points on the sphere
        let golden = PI * (3.0 - 5f64.sqrt());
        (0..count)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                let r = (1.0 - z * z).sqrt();
                let t = golden * i as f64;
                vec![r * t.cos(), r * t.sin(), z]
            })
            .collect()
    }
}

fn min_sym_eigenvalue(m: DMatrix<f64>) -> f64 {
    let sym = (&m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Coercivity of A over unit ξ (g-norm) sampled on `samples` directions.
pub fn coercivity(block: &EndomorphismBlock, psi: &Spinor, samples: usize) -> Result<CoercivityReport> {
    let n = block.n;
    let parts = spd_parts(&block.g_inv, n, 0)?;
    // orthonormal basis of {s : Re⟨ψ, s⟩ = 0} in R⁴
    let psi_r = nalgebra::Vector4::from(to_real(psi));
    let mut basis: Vec<nalgebra::Vector4<f64>> = Vec::new();
    if psi_r.norm() > 0.0 {
        let unit = psi_r / psi_r.norm();
        for i in 0..4 {
            let mut v = nalgebra::Vector4::zeros();
            v[i] = 1.0;
            v -= unit * unit.dot(&v);
            for b in &basis {
                v -= b * b.dot(&v);
            }
            if v.norm() > 1e-8 && basis.len() < 3 {
                basis.push(v / v.norm());
            }
        }
    }
    let q = DMatrix::from_fn(4, basis.len(), |r, c| basis[c][r]);
    let mut worst = f64::INFINITY;
    let mut worst_t = f64::INFINITY;
    let mut worst_xi = Vec::new();
    for u in unit_directions(n, samples) {
        // ξ = g^{1/2}... in covector form: ξ = (g^{-1})^{-1/2} u has |ξ|_g = 1
        let xi: Vec<f64> = (0..n).map(|k| (0..n).map(|l| parts.inv_sqrt[k][l] * u[l]).sum()).collect();
        let norm = block.xi_norm_sq(&xi);
        let m = DMatrix::from_fn(4, 4, |r, c| block.contract(&xi)[(r, c)]) / norm;
        let full = min_sym_eigenvalue(m.clone());
        if full < worst {
            worst = full;
            worst_xi = xi.clone();
        }
        if !basis.is_empty() {
            worst_t = worst_t.min(min_sym_eigenvalue(q.transpose() * &m * &q));
        }
    }
    if basis.is_empty() {
        worst_t = worst;
    }
    Ok(CoercivityReport {
        form: block.form,
        coercivity: worst,
        tangent_coercivity: worst_t,
        worst_xi,
        coercive: worst >= 1.0 - 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicityReport {
    pub tau: f64,
    pub c: f64,
    /// Principal coefficient −(1 − c/τ) of Δf in the scalar equation.
    pub f_coefficient: f64,
    /// Ellipticity constant of the metric block g^{kl}∇̂_k∇̂_l.
    pub metric_ellipticity: f64,
    /// Coercivity of each A(ψ) form.
    pub spinor_ellipticity: Vec<CoercivityReport>,
    pub verdict: Regime,
    pub description: String,
}

/// Parabolicity of the gauged system at a constant background with
/// spinor value ψ, |ψ|² = c.
pub fn parabolicity_report(k: &FlowConstants, psi: &Spinor, n: usize) -> Result<ParabolicityReport> {
    let rep = crate::clifford::build_rep(n)?;
    let c = psi.norm_squared();
    if (c - k.c).abs() > 1e-10 * k.c {
        return Err(Error::InvalidParameter(format!(
            "|psi|^2 = {c} does not match c = {}",
            k.c
        )));
    }
    let g = crate::linalg::identity(n);
    let mut spinor = Vec::new();
    for form in [AForm::Printed, AForm::Reordered, AForm::Derived] {
        let block = a_endomorphism(psi, &rep, k.tau, &g, form)?;
        spinor.push(coercivity(&block, psi, 360)?);
    }
    let f_coefficient = -(1.0 - k.c / k.tau);
    let (verdict, description) = if (k.c - k.tau).abs() <= 1e-12 * k.c.max(k.tau) {
        (Regime::Degenerate, "c = τ: the scalar equation degenerates".to_string())
    } else if k.c > k.tau {
        (
            Regime::FullyForward,
            "c > τ: uniformly forward parabolic in all variables".to_string(),
        )
    } else {
        (
            Regime::BackwardForward,
            "c < τ: the scalar equation is backward parabolic while (g, ψ) is forward".to_string(),
        )
    };
    Ok(ParabolicityReport {
        tau: k.tau,
        c: k.c,
        f_coefficient,
        metric_ellipticity: 1.0,
        spinor_ellipticity: spinor,
        verdict,
        description,
    })
}
