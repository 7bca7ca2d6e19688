//! Metric-derived data on the torus: orthonormal frame, Christoffel symbols,
//! spin connection, Ricci and scalar curvature, covariant derivatives of
//! covariant tensors, weighted scalar operators and the DeTurck vector field.
//!
//! Curvature is assembled in coordinates from Γ and ∂Γ; the frame curvature
//! from ω is kept only as a cross-check.

use crate::error::{Error, Result};
use crate::grid::{
    gradients_real, second_derivatives_real, Grid, LinearField, ScalarField, Sym2Field,
    TensorField, VectorField,
};
use crate::linalg::{self, Mat3, ZERO3};

pub type Arr3 = [[[f64; 3]; 3]; 3];
pub const ZERO_ARR3: Arr3 = [[[0.0; 3]; 3]; 3];

/// Choice of orthonormal frame at each point.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameGauge {
    /// e = g^{-1/2}, the unique symmetric positive root.
    SymmetricRoot,
    /// e = L^{-T} with g = L Lᵀ.
    Cholesky,
    /// Frame obtained from the symmetric root of a reference metric by
    /// parallel transport along the straight line of metrics.
    Transported(Sym2Field),
}

#[derive(Debug, Clone)]
pub struct GeometryCache {
    grid: Grid,
    pub g: Sym2Field,
    pub metric: Vec<Mat3>,
    pub inverse: Vec<Mat3>,
    pub sqrt_det: Vec<f64>,
    /// `frame[p][i][a]` = e_a^i.
    pub frame: Vec<Mat3>,
    /// `coframe[p][a][i]` = θ^a_i, so that ∂_i = θ^a_i e_a.
    pub coframe: Vec<Mat3>,
    /// `dg[p][k][i][j]` = ∂_k g_ij.
    pub dg: Vec<Arr3>,
    /// `christoffel[p][k][i][j]` = Γ^k_ij.
    pub christoffel: Vec<Arr3>,
    /// `omega[p][i][a][b]` = g(∇_i e_a, e_b).
    pub omega: Vec<Arr3>,
    pub ric: Sym2Field,
    pub scalar: ScalarField,
}

fn sym_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n {
            out.push((i, j));
        }
    }
    out
}

pub(crate) fn unflatten(mut flat: usize, rank: usize, n: usize) -> [usize; 4] {
    let mut idx = [0; 4];
    for s in (0..rank).rev() {
        idx[s] = flat % n;
        flat /= n;
    }
    idx
}

fn flatten(idx: &[usize], n: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

impl GeometryCache {
    pub fn new(g: &Sym2Field) -> Result<Self> {
        Self::with_gauge(g, &FrameGauge::SymmetricRoot)
    }

    pub fn with_gauge(g: &Sym2Field, gauge: &FrameGauge) -> Result<Self> {
        if g.rank() != 2 {
            return Err(Error::GridMismatch);
        }
        let grid = *g.grid();
        let n = grid.n();
        let len = grid.len();
        let g = g.symmetrized();

        let mut metric = Vec::with_capacity(len);
        let mut inverse = Vec::with_capacity(len);
        let mut sqrt_det = Vec::with_capacity(len);
        let mut frame = Vec::with_capacity(len);
        let mut coframe = Vec::with_capacity(len);
        for p in 0..len {
            let m = g.mat(p);
            let parts = linalg::spd_parts(&m, n, p)?;
            let (fr, co) = match gauge {
                FrameGauge::SymmetricRoot => (parts.inv_sqrt, parts.sqrt),
                FrameGauge::Cholesky => {
                    let l = linalg::cholesky(&m, n, p)?;
                    let linv = linalg::inverse(&l, n).ok_or(Error::NotPositiveDefinite {
                        point: p,
                        min_eig: parts.min_eig,
                    })?;
                    (linalg::transpose(&linv, n), linalg::transpose(&l, n))
                }
                FrameGauge::Transported(reference) => {
                    reference.grid().ensure_same(&grid)?;
                    let r = linalg::spd_parts(&reference.mat(p), n, p)?;
                    let mm = linalg::matmul(&linalg::matmul(&r.inv_sqrt, &m, n), &r.inv_sqrt, n);
                    let mp = linalg::spd_parts(&mm, n, p)?;
                    (
                        linalg::matmul(&r.inv_sqrt, &mp.inv_sqrt, n),
                        linalg::matmul(&mp.sqrt, &r.sqrt, n),
                    )
                }
            };
            metric.push(m);
            inverse.push(parts.inverse);
            sqrt_det.push(parts.det.sqrt());
            frame.push(fr);
            coframe.push(co);
        }

        // ∂_k g_ij
        let pairs = sym_pairs(n);
        let arrays: Vec<&[f64]> = pairs.iter().map(|&(i, j)| g.comp(&[i, j])).collect();
        let grads = gradients_real(&grid, &arrays);
        let mut dg = vec![ZERO_ARR3; len];
        for (q, &(i, j)) in pairs.iter().enumerate() {
            for k in 0..n {
                for p in 0..len {
                    dg[p][k][i][j] = grads[q][k][p];
                    dg[p][k][j][i] = grads[q][k][p];
                }
            }
        }

        let mut christoffel = vec![ZERO_ARR3; len];
        for p in 0..len {
            let d = &dg[p];
            let gi = &inverse[p];
            for k in 0..n {
                for &(i, j) in &pairs {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += gi[k][l] * (d[i][j][l] + d[j][i][l] - d[l][i][j]);
                    }
                    christoffel[p][k][i][j] = 0.5 * s;
                    christoffel[p][k][j][i] = 0.5 * s;
                }
            }
        }

        // ∂_m Γ^k_ij
        let gamma_keys: Vec<(usize, usize, usize)> = (0..n)
            .flat_map(|k| pairs.iter().map(move |&(i, j)| (k, i, j)))
            .collect();
        let gamma_arrays: Vec<Vec<f64>> = gamma_keys
            .iter()
            .map(|&(k, i, j)| christoffel.iter().map(|c| c[k][i][j]).collect())
            .collect();
        let refs: Vec<&[f64]> = gamma_arrays.iter().map(|v| v.as_slice()).collect();
        let dgamma_raw = gradients_real(&grid, &refs);
        // dgamma[p][m][k][i][j]
        let mut dgamma = vec![[ZERO_ARR3; 3]; len];
        for (q, &(k, i, j)) in gamma_keys.iter().enumerate() {
            for m in 0..n {
                for p in 0..len {
                    dgamma[p][m][k][i][j] = dgamma_raw[q][m][p];
                    dgamma[p][m][k][j][i] = dgamma_raw[q][m][p];
                }
            }
        }

        let mut ric = TensorField::zeros(grid, 2);
        let mut scalar = vec![0.0; len];
        for p in 0..len {
            let c = &christoffel[p];
            let dc = &dgamma[p];
            let mut r = ZERO3;
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += dc[k][k][i][j] - dc[j][k][i][k];
                        for l in 0..n {
                            s += c[k][k][l] * c[l][i][j] - c[k][j][l] * c[l][i][k];
                        }
                    }
                    r[i][j] = s;
                }
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    let avg = 0.5 * (r[i][j] + r[j][i]);
                    r[i][j] = avg;
                    r[j][i] = avg;
                }
            }
            ric.set_mat(p, &r);
            scalar[p] = linalg::frobenius(&inverse[p], &r, n);
        }

        // ∂_i e_a^l, differentiated through the frame map so that the
        // connection stays exactly compatible with the computed ∂g
        let slice = |d: &Arr3, i: usize| -> Mat3 {
            let mut h = ZERO3;
            for a in 0..n {
                for b in 0..n {
                    h[a][b] = d[i][a][b];
                }
            }
            h
        };
        let mut dframe = vec![[ZERO3; 3]; len];
        match gauge {
            FrameGauge::SymmetricRoot => {
                for p in 0..len {
                    for i in 0..n {
                        dframe[p][i] = linalg::inv_sqrt_derivative(&metric[p], &slice(&dg[p], i), n);
                    }
                }
            }
            FrameGauge::Cholesky => {
                for p in 0..len {
                    for i in 0..n {
                        dframe[p][i] =
                            linalg::cholesky_frame_derivative(&metric[p], &slice(&dg[p], i), n, p)?;
                    }
                }
            }
            FrameGauge::Transported(reference) => {
                // F = R^{-1/2} M^{-1/2} with M = R^{-1/2} g R^{-1/2}
                let arrays: Vec<&[f64]> = pairs.iter().map(|&(i, j)| reference.comp(&[i, j])).collect();
                let rgrads = gradients_real(&grid, &arrays);
                for p in 0..len {
                    let r = reference.mat(p);
                    let rp = linalg::spd_parts(&r, n, p)?;
                    let m = linalg::matmul(&linalg::matmul(&rp.inv_sqrt, &metric[p], n), &rp.inv_sqrt, n);
                    let mp = linalg::spd_parts(&m, n, p)?;
                    for i in 0..n {
                        let mut dr = ZERO3;
                        for (q, &(a, b)) in pairs.iter().enumerate() {
                            dr[a][b] = rgrads[q][i][p];
                            dr[b][a] = rgrads[q][i][p];
                        }
                        let dri = linalg::inv_sqrt_derivative(&r, &dr, n);
                        let mul = |a: &Mat3, b: &Mat3| linalg::matmul(a, b, n);
                        let dg_i = slice(&dg[p], i);
                        let dm = linalg::add(
                            &linalg::add(
                                &mul(&mul(&dri, &metric[p]), &rp.inv_sqrt),
                                &mul(&mul(&rp.inv_sqrt, &dg_i), &rp.inv_sqrt),
                                n,
                            ),
                            &mul(&mul(&rp.inv_sqrt, &metric[p]), &dri),
                            n,
                        );
                        let dmi = linalg::inv_sqrt_derivative(&m, &dm, n);
                        dframe[p][i] = linalg::add(&mul(&dri, &mp.inv_sqrt), &mul(&rp.inv_sqrt, &dmi), n);
                    }
                }
            }
        }
        let mut omega = vec![ZERO_ARR3; len];
        for p in 0..len {
            let fr = &frame[p];
            let c = &christoffel[p];
            let gm = &metric[p];
            for i in 0..n {
                // ∇_i e_a as a coordinate vector
                let mut nab = ZERO3; // nab[a][l]
                for (l, a) in (0..n).flat_map(|l| (0..n).map(move |a| (l, a))) {
                    let mut v = dframe[p][i][l][a];
                    for k in 0..n {
                        v += c[l][i][k] * fr[k][a];
                    }
                    nab[a][l] = v;
                }
                for a in 0..n {
                    for b in 0..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            for m in 0..n {
                                s += gm[l][m] * nab[a][l] * fr[m][b];
                            }
                        }
                        omega[p][i][a][b] = s;
                    }
                }
            }
        }

        Ok(Self {
            grid,
            g,
            metric,
            inverse,
            sqrt_det,
            frame,
            coframe,
            dg,
            christoffel,
            omega,
            ric,
            scalar: ScalarField::new(grid, scalar)?,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Riemannian volume density √det g as a field.
    pub fn volume_density(&self) -> ScalarField {
        ScalarField::new(self.grid, self.sqrt_det.clone()).expect("grid-sized data")
    }

    /// Largest |g(e_a, e_b) − δ_ab|.
    pub fn frame_defect(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for p in 0..self.grid.len() {
            let fr = &self.frame[p];
            let gm = &self.metric[p];
            let prod = linalg::matmul(&linalg::matmul(&linalg::transpose(fr, n), gm, n), fr, n);
            for a in 0..n {
                for b in 0..n {
                    let target = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((prod[a][b] - target).abs());
                }
            }
        }
        worst
    }

    /// Lower the index of a vector field: X_i = g_ij X^j.
    pub fn lower(&self, x: &VectorField) -> TensorField {
        self.apply_matrix(x, &self.metric)
    }

    /// Raise the index of a 1-form: α^i = g^{ij} α_j.
    pub fn raise(&self, alpha: &TensorField) -> VectorField {
        self.apply_matrix(alpha, &self.inverse)
    }

    fn apply_matrix(&self, x: &TensorField, mats: &[Mat3]) -> TensorField {
        let n = self.n();
        let mut out = TensorField::zeros(self.grid, 1);
        for p in 0..self.grid.len() {
            let v = x.vec_at(p);
            for i in 0..n {
                out.comps[i][p] = (0..n).map(|j| mats[p][i][j] * v[j]).sum();
            }
        }
        out
    }

    /// Covariant derivative of a covariant tensor of rank r; the new
    /// derivative index comes first: (∇T)_{k i_1 … i_r}.
    pub fn covariant_derivative(&self, t: &TensorField) -> TensorField {
        let n = self.n();
        let r = t.rank();
        let len = self.grid.len();
        let arrays: Vec<&[f64]> = t.comps.iter().map(|c| c.as_slice()).collect();
        let grads = gradients_real(&self.grid, &arrays);
        let mut out = TensorField::zeros(self.grid, r + 1);
        for (flat, comp) in out.comps.iter_mut().enumerate() {
            let idx = unflatten(flat, r + 1, n);
            let k = idx[0];
            let src = flatten(&idx[1..=r], n);
            for p in 0..len {
                let c = &self.christoffel[p];
                let mut v = grads[src][k][p];
                for s in 0..r {
                    let mut j = [0usize; 3];
                    j[..r].copy_from_slice(&idx[1..=r]);
                    for m in 0..n {
                        j[s] = m;
                        v -= c[m][k][idx[1 + s]] * t.comps[flatten(&j[..r], n)][p];
                    }
                }
                comp[p] = v;
            }
        }
        out
    }

    /// Weighted divergence in the first slot,
    /// (div_f T)_{i_2…} = g^{k i_1}∇_k T_{i_1 i_2…} − (∇f)^{i_1} T_{i_1 i_2…}.
    /// Pass `None` for the unweighted divergence. A rank-1 input yields a
    /// rank-0 field (a single component).
    pub fn divergence(&self, t: &TensorField, grad_f: Option<&VectorField>) -> TensorField {
        let n = self.n();
        let r = t.rank();
        assert!(r >= 1, "divergence needs rank at least one");
        let nab = self.covariant_derivative(t);
        let len = self.grid.len();
        let mut out = TensorField::zeros(self.grid, r - 1);
        for (flat, comp) in out.comps.iter_mut().enumerate() {
            let rest = unflatten(flat, r - 1, n);
            for p in 0..len {
                let gi = &self.inverse[p];
                let mut v = 0.0;
                let mut full = [0usize; 4];
                full[2..(r + 1)].copy_from_slice(&rest[..(r - 1)]);
                for k in 0..n {
                    for i in 0..n {
                        full[0] = k;
                        full[1] = i;
                        v += gi[k][i] * nab.comps[flatten(&full[..=r], n)][p];
                    }
                }
                if let Some(x) = grad_f {
                    for i in 0..n {
                        full[1] = i;
                        v -= x.comps[i][p] * t.comps[flatten(&full[1..=r], n)][p];
                    }
                }
                comp[p] = v;
            }
        }
        out
    }

    /// Coordinate gradient covector ∂_i φ.
    pub fn differential(&self, phi: &ScalarField) -> TensorField {
        let comps = crate::grid::gradient_real(&self.grid, &phi.data);
        TensorField::from_comps(self.grid, 1, comps).expect("grid-sized data")
    }

    /// ∇φ with index raised.
    pub fn gradient(&self, phi: &ScalarField) -> VectorField {
        self.raise(&self.differential(phi))
    }

    /// ∇∇φ = ∂_i∂_jφ − Γ^k_ij ∂_kφ.
    pub fn hessian(&self, phi: &ScalarField) -> Sym2Field {
        let n = self.n();
        let dd = second_derivatives_real(&self.grid, &phi.data);
        let d = crate::grid::gradient_real(&self.grid, &phi.data);
        let mut out = TensorField::zeros(self.grid, 2);
        for p in 0..self.grid.len() {
            let c = &self.christoffel[p];
            for i in 0..n {
                for j in 0..n {
                    let mut v = 0.5 * (dd[i * n + j][p] + dd[j * n + i][p]);
                    for k in 0..n {
                        v -= c[k][i][j] * d[k][p];
                    }
                    out.comps[i * n + j][p] = v;
                }
            }
        }
        out
    }

    /// g^{ij} a_ij.
    pub fn trace(&self, a: &Sym2Field) -> ScalarField {
        let n = self.n();
        let data = (0..self.grid.len())
            .map(|p| linalg::frobenius(&self.inverse[p], &a.mat(p), n))
            .collect();
        ScalarField::new(self.grid, data).expect("grid-sized data")
    }

    /// Δφ = tr_g ∇∇φ.
    pub fn laplacian(&self, phi: &ScalarField) -> ScalarField {
        self.trace(&self.hessian(phi))
    }

    /// Pointwise g^{ik}g^{jl} a_ij b_kl.
    pub fn pairing(&self, a: &Sym2Field, b: &Sym2Field) -> ScalarField {
        let n = self.n();
        let data = (0..self.grid.len())
            .map(|p| linalg::metric_pairing(&a.mat(p), &b.mat(p), &self.inverse[p], n))
            .collect();
        ScalarField::new(self.grid, data).expect("grid-sized data")
    }

    /// Pointwise g(X, Y) of two vector fields.
    pub fn vector_inner(&self, x: &VectorField, y: &VectorField) -> ScalarField {
        let n = self.n();
        let data = (0..self.grid.len())
            .map(|p| {
                let (u, v) = (x.vec_at(p), y.vec_at(p));
                let m = &self.metric[p];
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += m[i][j] * u[i] * v[j];
                    }
                }
                s
            })
            .collect();
        ScalarField::new(self.grid, data).expect("grid-sized data")
    }

    /// div X = g^{ij}∇_i X_j for a vector field X.
    pub fn divergence_vector(&self, x: &VectorField) -> ScalarField {
        rank0_to_scalar(&self.divergence(&self.lower(x), None))
    }

    /// (ℒ_X g)_ij = ∇_i X_j + ∇_j X_i.
    pub fn lie_derivative_metric(&self, x: &VectorField) -> Sym2Field {
        let n = self.n();
        let nab = self.covariant_derivative(&self.lower(x));
        let mut out = TensorField::zeros(self.grid, 2);
        for i in 0..n {
            for j in 0..n {
                let a = &nab.comps[i * n + j];
                let b = &nab.comps[j * n + i];
                out.comps[i * n + j] = a.iter().zip(b).map(|(u, v)| u + v).collect();
            }
        }
        out
    }

    /// Components a(e_a, e_b) of a 2-tensor in the orthonormal frame.
    pub fn to_frame(&self, a: &Mat3, p: usize) -> Mat3 {
        let n = self.n();
        let f = &self.frame[p];
        linalg::matmul(&linalg::matmul(&linalg::transpose(f, n), a, n), f, n)
    }

    /// Coordinate components a_ij = θ^a_i θ^b_j a_ab of a frame 2-tensor.
    pub fn from_frame(&self, a: &Mat3, p: usize) -> Mat3 {
        let n = self.n();
        let c = &self.coframe[p];
        linalg::matmul(&linalg::matmul(&linalg::transpose(c, n), a, n), c, n)
    }

    /// Scalar curvature recomputed from the connection forms,
    /// R = −Σ_{a,b} e_a^i e_b^j Ω_{ij,ab} with Ω_{ij} = ∂_iω_j − ∂_jω_i − [ω_i, ω_j]
    /// (ω_{iab} = g(∇_i e_a, e_b) is the transpose of the connection matrix).
    /// Used only as a cross-check.
    pub fn frame_scalar_curvature(&self) -> ScalarField {
        let n = self.n();
        let len = self.grid.len();
        let keys: Vec<(usize, usize, usize)> = (0..n)
            .flat_map(|j| (0..n).flat_map(move |a| (0..n).map(move |b| (j, a, b))))
            .collect();
        let arrays: Vec<Vec<f64>> = keys
            .iter()
            .map(|&(j, a, b)| self.omega.iter().map(|w| w[j][a][b]).collect())
            .collect();
        let refs: Vec<&[f64]> = arrays.iter().map(|v| v.as_slice()).collect();
        let d = gradients_real(&self.grid, &refs);
        let key = |j: usize, a: usize, b: usize| (j * n + a) * n + b;
        let data = (0..len)
            .map(|p| {
                let w = &self.omega[p];
                let f = &self.frame[p];
                let mut s = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        for i in 0..n {
                            for j in 0..n {
                                let mut curv = d[key(j, a, b)][i][p] - d[key(i, a, b)][j][p];
                                for c in 0..n {
                                    curv += w[j][a][c] * w[i][c][b] - w[i][a][c] * w[j][c][b];
                                }
                                s -= f[i][a] * f[j][b] * curv;
                            }
                        }
                    }
                }
                s
            })
            .collect();
        ScalarField::new(self.grid, data).expect("grid-sized data")
    }
}

pub fn rank0_to_scalar(t: &TensorField) -> ScalarField {
    ScalarField::new(*t.grid(), t.comps[0].clone()).expect("grid-sized data")
}

/// Orthonormal frame of the symmetric root gauge, e_a^i = (g^{-1/2})_{ia}.
pub fn orthonormal_frame(g: &Sym2Field) -> Result<Vec<Mat3>> {
    let n = g.grid().n();
    (0..g.grid().len())
        .map(|p| Ok(linalg::spd_parts(&g.mat(p), n, p)?.inv_sqrt))
        .collect()
}

pub fn christoffel(g: &Sym2Field) -> Result<Vec<Arr3>> {
    Ok(GeometryCache::new(g)?.christoffel)
}

pub fn curvature(g: &Sym2Field) -> Result<(Sym2Field, ScalarField)> {
    let geo = GeometryCache::new(g)?;
    Ok((geo.ric, geo.scalar))
}

pub fn lie_derivative_metric(x: &VectorField, g: &Sym2Field) -> Result<Sym2Field> {
    x.grid().ensure_same(g.grid())?;
    Ok(GeometryCache::new(g)?.lie_derivative_metric(x))
}

/// Weighted quantities derived from (g, f).
#[derive(Debug, Clone)]
pub struct WeightedOps {
    /// ∂_i f.
    pub df: TensorField,
    /// ∇f with index raised.
    pub grad_f: VectorField,
    pub grad_f_sq: ScalarField,
    pub hess_f: Sym2Field,
    pub lap_f: ScalarField,
    pub ric_f: Sym2Field,
    pub r_f: ScalarField,
}

pub fn weighted_scalar_ops(geo: &GeometryCache, f: &ScalarField) -> Result<WeightedOps> {
    geo.grid().ensure_same(f.grid())?;
    let df = geo.differential(f);
    let grad_f = geo.raise(&df);
    let grad_f_sq = ScalarField::new(
        *geo.grid(),
        (0..geo.grid().len())
            .map(|p| {
                let (a, b) = (df.vec_at(p), grad_f.vec_at(p));
                (0..geo.n()).map(|i| a[i] * b[i]).sum()
            })
            .collect(),
    )?;
    let hess_f = geo.hessian(f);
    let lap_f = geo.trace(&hess_f);
    let ric_f = geo.ric.plus(&hess_f, 1.0);
    let r_f = ScalarField::new(
        *geo.grid(),
        (0..geo.grid().len())
            .map(|p| geo.scalar.data[p] + 2.0 * lap_f.data[p] - grad_f_sq.data[p])
            .collect(),
    )?;
    Ok(WeightedOps {
        df,
        grad_f,
        grad_f_sq,
        hess_f,
        lap_f,
        ric_f,
        r_f,
    })
}

impl WeightedOps {
    /// Δ_f φ = Δφ − ⟨∇f, ∇φ⟩.
    pub fn laplacian_f(&self, geo: &GeometryCache, phi: &ScalarField) -> ScalarField {
        let lap = geo.laplacian(phi);
        let d = geo.differential(phi);
        let n = geo.n();
        ScalarField::new(
            *geo.grid(),
            (0..geo.grid().len())
                .map(|p| {
                    lap.data[p] - (0..n).map(|i| self.grad_f.comps[i][p] * d.comps[i][p]).sum::<f64>()
                })
                .collect(),
        )
        .expect("grid-sized data")
    }

    /// Weighted divergence of a covariant tensor in its first slot.
    pub fn div_f(&self, geo: &GeometryCache, t: &TensorField) -> TensorField {
        geo.divergence(t, Some(&self.grad_f))
    }
}

/// W^k = g^{ij}(Γ^k_ij(g) − Γ^k_ij(g₀)).
pub fn deturck_from_caches(geo: &GeometryCache, geo0: &GeometryCache) -> VectorField {
    let n = geo.n();
    let mut out = TensorField::zeros(*geo.grid(), 1);
    for p in 0..geo.grid().len() {
        let (c, c0, gi) = (&geo.christoffel[p], &geo0.christoffel[p], &geo.inverse[p]);
        for k in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += gi[i][j] * (c[k][i][j] - c0[k][i][j]);
                }
            }
            out.comps[k][p] = s;
        }
    }
    out
}

pub fn deturck_vector(g: &Sym2Field, g0: &Sym2Field) -> Result<VectorField> {
    g.grid().ensure_same(g0.grid())?;
    Ok(deturck_from_caches(&GeometryCache::new(g)?, &GeometryCache::new(g0)?))
}
