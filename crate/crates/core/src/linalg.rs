//! Small dense helpers for the per-point n×n algebra (n ≤ 3).
//!
//! Matrices are stored as `[[f64; 3]; 3]`; only the leading n×n block is
//! meaningful. Metric-like quantities are padded with the identity before
//! being handed to nalgebra so that determinants, inverses and square roots
//! of the padded matrix agree with those of the n×n block.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];

pub const ZERO3: Mat3 = [[0.0; 3]; 3];

/// Pointwise SPD tolerance: the smallest eigenvalue must exceed this.
pub const SPD_MIN_EIGENVALUE: f64 = 1e-6;

pub fn identity(n: usize) -> Mat3 {
    let mut m = ZERO3;
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    m
}

fn padded(m: &Mat3, n: usize) -> Matrix3<f64> {
    let mut out = Matrix3::identity();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = m[i][j];
        }
    }
    out
}

fn unpad(m: &Matrix3<f64>, n: usize) -> Mat3 {
    let mut out = ZERO3;
    for i in 0..n {
        for j in 0..n {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

/// Spectral data of a symmetric positive definite n×n matrix.
#[derive(Debug, Clone, Copy)]
pub struct SpdParts {
    pub inverse: Mat3,
    pub sqrt: Mat3,
    pub inv_sqrt: Mat3,
    pub det: f64,
    pub min_eig: f64,
}

/// Symmetric eigen-decomposition based inverse and square roots.
///
/// `point` is only used to build the error message.
pub fn spd_parts(m: &Mat3, n: usize, point: usize) -> Result<SpdParts> {
    let a = padded(m, n);
    let a = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut min_eig = f64::INFINITY;
    for i in 0..3 {
        min_eig = min_eig.min(eig.eigenvalues[i]);
    }
    if !(min_eig > SPD_MIN_EIGENVALUE) {
        return Err(Error::NotPositiveDefinite { point, min_eig });
    }
    let q = eig.eigenvectors;
    let build = |fun: &dyn Fn(f64) -> f64| {
        let d = Matrix3::from_diagonal(&eig.eigenvalues.map(fun));
        q * d * q.transpose()
    };
    let det = eig.eigenvalues.iter().product();
    Ok(SpdParts {
        inverse: unpad(&build(&|x| 1.0 / x), n),
        sqrt: unpad(&build(&f64::sqrt), n),
        inv_sqrt: unpad(&build(&|x| 1.0 / x.sqrt()), n),
        det,
        min_eig,
    })
}

/// Lower Cholesky factor L with m = L Lᵀ.
pub fn cholesky(m: &Mat3, n: usize, point: usize) -> Result<Mat3> {
    let a = padded(m, n);
    match a.cholesky() {
        Some(c) => Ok(unpad(&c.l(), n)),
        None => Err(Error::NotPositiveDefinite {
            point,
            min_eig: f64::NAN,
        }),
    }
}

pub fn inverse(m: &Mat3, n: usize) -> Option<Mat3> {
    padded(m, n).try_inverse().map(|x| unpad(&x, n))
}

pub fn matmul(a: &Mat3, b: &Mat3, n: usize) -> Mat3 {
    let mut c = ZERO3;
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[i][k] * b[k][j];
            }
            c[i][j] = s;
        }
    }
    c
}

pub fn add(a: &Mat3, b: &Mat3, n: usize) -> Mat3 {
    let mut out = ZERO3;
    for i in 0..n {
        for j in 0..n {
            out[i][j] = a[i][j] + b[i][j];
        }
    }
    out
}

pub fn transpose(a: &Mat3, n: usize) -> Mat3 {
    let mut c = ZERO3;
    for i in 0..n {
        for j in 0..n {
            c[i][j] = a[j][i];
        }
    }
    c
}

pub fn trace(a: &Mat3, n: usize) -> f64 {
    (0..n).map(|i| a[i][i]).sum()
}

/// Frobenius inner product Σ a_ij b_ij.
pub fn frobenius(a: &Mat3, b: &Mat3, n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

/// Metric inner product g^{ik} g^{jl} a_ij b_kl of two covariant 2-tensors.
pub fn metric_pairing(a: &Mat3, b: &Mat3, g_inv: &Mat3, n: usize) -> f64 {
    let a_up = matmul(&matmul(g_inv, a, n), g_inv, n);
    frobenius(&a_up, b, n)
}

/// Smallest eigenvalue of a symmetric n×n block.
pub fn min_eigenvalue(m: &Mat3, n: usize) -> f64 {
    if n == 2 {
        let (a, b, d) = (m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]);
        let mean = 0.5 * (a + d);
        return mean - (0.25 * (a - d) * (a - d) + b * b).sqrt();
    }
    let mut a = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            a[(i, j)] = 0.5 * (m[i][j] + m[j][i]);
        }
    }
    SymmetricEigen::new(a).eigenvalues.min()
}

/// Antisymmetric part of F⁻¹Ḟ for the symmetric-root frame F = g^{-1/2}
/// moving with ġ, in frame indices.
///
/// The symmetric part of F⁻¹Ḟ is always −½ġ(e_a, e_b); the antisymmetric
/// part measures how far the symmetric-root frame rotates away from the
/// parallel (Bourguignon–Gauduchon) identification of frames along the path.
pub fn symmetric_root_rotation_rate(g: &Mat3, gdot: &Mat3, n: usize) -> Mat3 {
    let a = padded(g, n);
    let a = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let q = eig.eigenvectors;
    let mut gd = Matrix3::zeros();
    for i in 0..n {
        for j in 0..n {
            gd[(i, j)] = 0.5 * (gdot[i][j] + gdot[j][i]);
        }
    }
    let gp = q.transpose() * gd * q;
    let lam = eig.eigenvalues;
    let mut rot = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let (li, lj) = (lam[i], lam[j]);
            let dd = if (li - lj).abs() <= 1e-12 * li.abs().max(lj.abs()) {
                -0.5 * li.powf(-1.5)
            } else {
                (li.powf(-0.5) - lj.powf(-0.5)) / (li - lj)
            };
            rot[(i, j)] = 0.5 * gp[(i, j)] * dd * (li.sqrt() - lj.sqrt());
        }
    }
    unpad(&(q * rot * q.transpose()), n)
}

/// Derivative of g^{-1/2} in the direction h (Daleckii–Krein).
pub fn inv_sqrt_derivative(g: &Mat3, h: &Mat3, n: usize) -> Mat3 {
    let a = padded(g, n);
    let eig = SymmetricEigen::new((a + a.transpose()) * 0.5);
    let q = eig.eigenvectors;
    let mut hp = Matrix3::zeros();
    for i in 0..n {
        for j in 0..n {
            hp[(i, j)] = 0.5 * (h[i][j] + h[j][i]);
        }
    }
    let mut hp = q.transpose() * hp * q;
    let r = eig.eigenvalues.map(f64::sqrt);
    for i in 0..3 {
        for j in 0..3 {
            // (λ_i^{-1/2} − λ_j^{-1/2}) / (λ_i − λ_j), stable for λ_i = λ_j
            hp[(i, j)] *= -1.0 / (r[i] * r[j] * (r[i] + r[j]));
        }
    }
    unpad(&(q * hp * q.transpose()), n)
}

/// Derivative of the Cholesky frame L^{-T} (g = LLᵀ) in the direction h.
pub fn cholesky_frame_derivative(g: &Mat3, h: &Mat3, n: usize, point: usize) -> Result<Mat3> {
    let l = padded(&cholesky(g, n, point)?, n);
    let linv = l.try_inverse().ok_or(Error::NotPositiveDefinite { point, min_eig: f64::NAN })?;
    let mut hz = Matrix3::zeros();
    for i in 0..n {
        for j in 0..n {
            hz[(i, j)] = h[i][j];
        }
    }
    let mut x = linv * hz * linv.transpose();
    for i in 0..3 {
        x[(i, i)] *= 0.5;
        for j in (i + 1)..3 {
            x[(i, j)] = 0.0;
        }
    }
    let dl = l * x;
    let f = linv.transpose();
    Ok(unpad(&(-(f * dl.transpose() * f)), n))
}
