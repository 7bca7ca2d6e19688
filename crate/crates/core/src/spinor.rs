//! Spinor differential operators on the trivial spin structure of the torus
//! and the auxiliary tensors built from a spinor: T_ψ, ⟨∇ψ⊗∇ψ⟩, S, V, U, V_f.
//!
//! Spinors are C²-valued fields expressed in the orthonormal frame of the
//! geometry cache. Clifford contractions happen in frame components and are
//! converted to coordinates once per tensor.

use num_complex::Complex64;

use crate::clifford::{re_inner, CliffordRep, M2};
use crate::error::{Error, Result};
use crate::geometry::{GeometryCache, WeightedOps};
use crate::grid::{
    gradient_complex, LinearField, ScalarField, Spinor, SpinorField, Sym2Field, TensorField,
    VectorField,
};
use crate::linalg::Mat3;

/// Geometry plus the Clifford data needed to act on spinors.
#[derive(Debug, Clone)]
pub struct SpinGeometry {
    pub geo: GeometryCache,
    pub rep: CliffordRep,
    /// `conn[p][i]` = ¼ Σ_{a,b} ω_iab γ_a γ_b.
    pub conn: Vec<[M2; 3]>,
    /// `gamma_lower[p][i]` = Clifford action of ∂_i, θ^a_i γ_a.
    pub gamma_lower: Vec<[M2; 3]>,
    /// `gamma_upper[p][i]` = e_a^i γ_a, so that D = gamma_upper[i] ∇_i.
    pub gamma_upper: Vec<[M2; 3]>,
}

fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

impl SpinGeometry {
    pub fn new(geo: GeometryCache, rep: CliffordRep) -> Result<Self> {
        let n = geo.n();
        if rep.n() != n {
            return Err(Error::InvalidParameter(format!(
                "Clifford representation of dimension {} used with an {n}-dimensional grid",
                rep.n()
            )));
        }
        let len = geo.grid().len();
        let mut conn = Vec::with_capacity(len);
        let mut gamma_lower = Vec::with_capacity(len);
        let mut gamma_upper = Vec::with_capacity(len);
        for p in 0..len {
            let mut c = [M2::zeros(); 3];
            let mut lo = [M2::zeros(); 3];
            let mut up = [M2::zeros(); 3];
            for i in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        if a != b {
                            c[i] += rep.gamma(a) * rep.gamma(b) * cr(0.25 * geo.omega[p][i][a][b]);
                        }
                    }
                    lo[i] += rep.gamma(a) * cr(geo.coframe[p][a][i]);
                    up[i] += rep.gamma(a) * cr(geo.frame[p][i][a]);
                }
            }
            conn.push(c);
            gamma_lower.push(lo);
            gamma_upper.push(up);
        }
        Ok(Self {
            geo,
            rep,
            conn,
            gamma_lower,
            gamma_upper,
        })
    }

    pub fn n(&self) -> usize {
        self.geo.n()
    }

    fn check(&self, psi: &SpinorField) -> Result<()> {
        self.geo.grid().ensure_same(psi.grid())
    }

    /// Clifford action of a coordinate vector field X^i ∂_i.
    pub fn clifford_vector_field(&self, x: &VectorField, psi: &SpinorField) -> SpinorField {
        let n = self.n();
        psi.map_points(|p, v| {
            let mut m = M2::zeros();
            for i in 0..n {
                m += self.gamma_lower[p][i] * cr(x.comps[i][p]);
            }
            m * v
        })
    }

    /// Clifford action of a 1-form α_i dx^i (index raised by g).
    pub fn clifford_covector_field(&self, alpha: &TensorField, psi: &SpinorField) -> SpinorField {
        let n = self.n();
        psi.map_points(|p, v| {
            let mut m = M2::zeros();
            for i in 0..n {
                m += self.gamma_upper[p][i] * cr(alpha.comps[i][p]);
            }
            m * v
        })
    }
}

/// ψ together with its covariant derivative.
#[derive(Debug, Clone)]
pub struct SpinorJet {
    pub value: SpinorField,
    /// ∇_iψ in coordinate directions.
    pub coord: Vec<SpinorField>,
    /// ∇_aψ = e_a^i ∇_iψ in frame directions.
    pub frame: Vec<SpinorField>,
}

impl SpinorJet {
    /// |∇ψ|² = Σ_a |∇_aψ|².
    pub fn norm_sq(&self) -> ScalarField {
        let grid = *self.value.grid();
        let data = (0..grid.len())
            .map(|p| self.frame.iter().map(|s| s.at(p).norm_squared()).sum())
            .collect();
        ScalarField::new(grid, data).expect("grid-sized data")
    }
}

fn partials(psi: &SpinorField) -> Vec<SpinorField> {
    let grid = *psi.grid();
    let d0 = gradient_complex(&grid, &psi.comps[0]);
    let d1 = gradient_complex(&grid, &psi.comps[1]);
    d0.into_iter()
        .zip(d1)
        .map(|(a, b)| SpinorField::from_comps(grid, [a, b]).expect("grid-sized data"))
        .collect()
}

/// ∇_iψ = ∂_iψ + ¼ω_iab γ_aγ_b ψ, also returned in frame directions.
pub fn covariant_derivative_spinor(psi: &SpinorField, sg: &SpinGeometry) -> Result<SpinorJet> {
    sg.check(psi)?;
    let n = sg.n();
    let mut coord = partials(psi);
    for (i, d) in coord.iter_mut().enumerate() {
        *d = d.map_points(|p, v| v + sg.conn[p][i] * psi.at(p));
    }
    let frame = (0..n)
        .map(|a| {
            SpinorField::from_fn_indexed(*psi.grid(), |p| {
                (0..n).fold(Spinor::zeros(), |acc, i| acc + coord[i].at(p) * cr(sg.geo.frame[p][i][a]))
            })
        })
        .collect();
    Ok(SpinorJet {
        value: psi.clone(),
        coord,
        frame,
    })
}

fn dirac_of_jet(jet: &SpinorJet, sg: &SpinGeometry) -> SpinorField {
    let n = sg.n();
    SpinorField::from_fn_indexed(*jet.value.grid(), |p| {
        (0..n).fold(Spinor::zeros(), |acc, i| acc + sg.gamma_upper[p][i] * jet.coord[i].at(p))
    })
}

/// Dψ = Σ_a γ_a ∇_aψ.
pub fn dirac(psi: &SpinorField, sg: &SpinGeometry) -> Result<SpinorField> {
    Ok(dirac_of_jet(&covariant_derivative_spinor(psi, sg)?, sg))
}

/// D_fψ = Dψ − ½∇f·ψ.
pub fn dirac_f(psi: &SpinorField, sg: &SpinGeometry, w: &WeightedOps) -> Result<SpinorField> {
    let d = dirac(psi, sg)?;
    Ok(d.plus(&sg.clifford_covector_field(&w.df, psi), -0.5))
}

/// Δ_fψ = g^{ij}(∇_i∇_jψ − Γ^k_ij∇_kψ) − ∇_{∇f}ψ. Pass `None` for f = 0.
pub fn laplacian_f_spinor(
    psi: &SpinorField,
    sg: &SpinGeometry,
    w: Option<&WeightedOps>,
) -> Result<SpinorField> {
    let jet = covariant_derivative_spinor(psi, sg)?;
    Ok(laplacian_of_jet(&jet, sg, w))
}

pub(crate) fn laplacian_of_jet(
    jet: &SpinorJet,
    sg: &SpinGeometry,
    w: Option<&WeightedOps>,
) -> SpinorField {
    let n = sg.n();
    let second: Vec<Vec<SpinorField>> = jet.coord.iter().map(partials).collect(); // [j][i] = ∂_i Ψ_j
    SpinorField::from_fn_indexed(*jet.value.grid(), |p| {
        let gi = &sg.geo.inverse[p];
        let c = &sg.geo.christoffel[p];
        let mut acc = Spinor::zeros();
        for i in 0..n {
            for j in 0..n {
                if gi[i][j] == 0.0 {
                    continue;
                }
                let mut h = second[j][i].at(p) + sg.conn[p][i] * jet.coord[j].at(p);
                for k in 0..n {
                    h -= jet.coord[k].at(p) * cr(c[k][i][j]);
                }
                acc += h * cr(gi[i][j]);
            }
        }
        if let Some(w) = w {
            for i in 0..n {
                acc -= jet.coord[i].at(p) * cr(w.grad_f.comps[i][p]);
            }
        }
        acc
    })
}

/// Spinorial Lie derivative
/// ℒ_Xψ = ∇_Xψ − ¼ Σ_{a<b} (∇_aX_b − ∇_bX_a) γ_aγ_b ψ.
pub fn kosmann_lie(x: &VectorField, psi: &SpinorField, sg: &SpinGeometry) -> Result<SpinorField> {
    let jet = covariant_derivative_spinor(psi, sg)?;
    Ok(kosmann_of_jet(x, &jet, sg))
}

pub(crate) fn kosmann_of_jet(x: &VectorField, jet: &SpinorJet, sg: &SpinGeometry) -> SpinorField {
    let n = sg.n();
    let nab = sg.geo.covariant_derivative(&sg.geo.lower(x));
    SpinorField::from_fn_indexed(*jet.value.grid(), |p| {
        let mut out = Spinor::zeros();
        for i in 0..n {
            out += jet.coord[i].at(p) * cr(x.comps[i][p]);
        }
        let mut coord = [[0.0; 3]; 3];
        for k in 0..n {
            for j in 0..n {
                coord[k][j] = nab.comps[k * n + j][p];
            }
        }
        let fr = sg.geo.to_frame(&coord, p);
        let mut curl = [[0.0; 3]; 3];
        for a in 0..n {
            for b in 0..n {
                curl[a][b] = -0.5 * (fr[a][b] - fr[b][a]);
            }
        }
        out + sg.rep.bivector_matrix(&curl) * jet.value.at(p)
    })
}

/// Spin-lifted action ¼ Σ A_ab γ_aγ_b ψ of a field of antisymmetric frame
/// endomorphisms.
pub fn rotate_spinor(a: &[Mat3], psi: &SpinorField, rep: &CliffordRep) -> SpinorField {
    psi.map_points(|p, v| rep.bivector_matrix(&a[p]) * v)
}

/// Pointwise Re⟨a, b⟩.
pub fn re_inner_field(a: &SpinorField, b: &SpinorField) -> ScalarField {
    let grid = *a.grid();
    let data = (0..grid.len()).map(|p| re_inner(&a.at(p), &b.at(p))).collect();
    ScalarField::new(grid, data).expect("grid-sized data")
}

/// The auxiliary tensors of a spinor, all in coordinate components.
#[derive(Debug, Clone)]
pub struct SpinorTensors {
    /// T_ψ(∂_i, ∂_j, ∂_k).
    pub t: TensorField,
    /// ⟨∇ψ⊗∇ψ⟩.
    pub p: Sym2Field,
    pub s: Sym2Field,
    /// Σ_a Re⟨ψ, e_a·D_fψ⟩ e_a.
    pub v: VectorField,
    /// Σ_a Re⟨ψ, e_a·Dψ⟩ e_a.
    pub u: VectorField,
    /// U + ½|ψ|²∇f.
    pub vf: VectorField,
}

pub(crate) fn tensors_of_jet(
    jet: &SpinorJet,
    d_psi: &SpinorField,
    df_psi: &SpinorField,
    sg: &SpinGeometry,
    w: &WeightedOps,
) -> SpinorTensors {
    let n = sg.n();
    let grid = *jet.value.grid();
    let len = grid.len();
    let mut t = TensorField::zeros(grid, 3);
    let mut pt = TensorField::zeros(grid, 2);
    let mut s = TensorField::zeros(grid, 2);
    let mut v = TensorField::zeros(grid, 1);
    let mut u = TensorField::zeros(grid, 1);
    let mut vf = TensorField::zeros(grid, 1);
    let half = cr(0.5);
    for p in 0..len {
        let psi = jet.value.at(p);
        let nab: Vec<Spinor> = (0..n).map(|i| jet.coord[i].at(p)).collect();
        let gl = &sg.gamma_lower[p];
        let dfp = df_psi.at(p);
        let dp = d_psi.at(p);
        let mut cpsi = [[Spinor::zeros(); 3]; 3];
        for i in 0..n {
            for j in 0..n {
                cpsi[i][j] = (gl[i] * gl[j] - gl[j] * gl[i]) * half * psi;
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let val = 0.5 * (re_inner(&cpsi[i][j], &nab[k]) + re_inner(&cpsi[i][k], &nab[j]));
                    t.comps[(i * n + j) * n + k][p] = val;
                }
                pt.comps[i * n + j][p] = re_inner(&nab[i], &nab[j]);
                s.comps[i * n + j][p] = re_inner(&dfp, &(gl[i] * nab[j] + gl[j] * nab[i]));
            }
            let gu = &sg.gamma_upper[p][i];
            v.comps[i][p] = re_inner(&psi, &(gu * dfp));
            u.comps[i][p] = re_inner(&psi, &(gu * dp));
            vf.comps[i][p] = u.comps[i][p] + 0.5 * psi.norm_squared() * w.grad_f.comps[i][p];
        }
    }
    SpinorTensors {
        t,
        p: pt,
        s,
        v,
        u,
        vf,
    }
}

pub fn spinor_tensors(psi: &SpinorField, sg: &SpinGeometry, w: &WeightedOps) -> Result<SpinorTensors> {
    let jet = covariant_derivative_spinor(psi, sg)?;
    let d = dirac_of_jet(&jet, sg);
    let df = d.plus(&sg.clifford_covector_field(&w.df, psi), -0.5);
    Ok(tensors_of_jet(&jet, &d, &df, sg, w))
}

pub fn dirac_of(jet: &SpinorJet, sg: &SpinGeometry) -> SpinorField {
    dirac_of_jet(jet, sg)
}

/// div_f T_ψ − (−½Ric_f|ψ|² + ½∇∇|ψ|² − 2⟨∇ψ⊗∇ψ⟩ + S + ½ℒ_V g).
pub fn div_f_t_identity_residual(
    psi: &SpinorField,
    sg: &SpinGeometry,
    w: &WeightedOps,
) -> Result<Sym2Field> {
    let tens = spinor_tensors(psi, sg, w)?;
    let geo = &sg.geo;
    let lhs = w.div_f(geo, &tens.t);
    let norm = psi.norm_sq();
    let rhs = w
        .ric_f
        .times_scalar(&norm)
        .combine(-0.5, &geo.hessian(&norm), 0.5)
        .plus(&tens.p, -2.0)
        .plus(&tens.s, 1.0)
        .plus(&geo.lie_derivative_metric(&tens.v), 0.5);
    Ok(lhs.plus(&rhs, -1.0))
}

/// Antisymmetric rotation rate of the symmetric-root frame along ġ, per point.
pub fn frame_rotation_rate(g: &Sym2Field, gdot: &Sym2Field) -> Vec<Mat3> {
    let n = g.grid().n();
    (0..g.grid().len())
        .map(|p| crate::linalg::symmetric_root_rotation_rate(&g.mat(p), &gdot.mat(p), n))
        .collect()
}

/// Converts a spinor velocity taken with parallel identification of spinor
/// bundles along g + tġ into the rate of change of the stored components:
/// ψ̇_components = ψ̇ + ¼ Σ A_ab γ_aγ_b ψ.
pub fn parallel_to_components(
    g: &Sym2Field,
    gdot: &Sym2Field,
    psi: &SpinorField,
    psi_dot: &SpinorField,
    rep: &CliffordRep,
) -> SpinorField {
    psi_dot.plus(&rotate_spinor(&frame_rotation_rate(g, gdot), psi, rep), 1.0)
}

/// Inverse of [`parallel_to_components`].
pub fn components_to_parallel(
    g: &Sym2Field,
    gdot: &Sym2Field,
    psi: &SpinorField,
    comp_dot: &SpinorField,
    rep: &CliffordRep,
) -> SpinorField {
    comp_dot.plus(&rotate_spinor(&frame_rotation_rate(g, gdot), psi, rep), -1.0)
}
