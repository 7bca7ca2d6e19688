//! Matrix representation of the Clifford algebra Cl(n) for n ∈ {2, 3} on
//! C², with the relation γ_a γ_b + γ_b γ_a = −2δ_ab and skew-Hermitian γ_a.

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Spinor;

pub type M2 = Matrix2<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn pauli_x() -> M2 {
    M2::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> M2 {
    M2::new(ZERO, -I, I, ZERO)
}

pub fn pauli_z() -> M2 {
    M2::new(ONE, ZERO, ZERO, -ONE)
}

/// Hermitian inner product ⟨a, b⟩ = a† b.
pub fn inner(a: &Spinor, b: &Spinor) -> Complex64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

/// Re⟨a, b⟩, symmetric in its arguments.
pub fn re_inner(a: &Spinor, b: &Spinor) -> f64 {
    a[0].re * b[0].re + a[0].im * b[0].im + a[1].re * b[1].re + a[1].im * b[1].im
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliffordRep {
    n: usize,
    gammas: Vec<M2>,
}

/// γ₁ = iσx, γ₂ = iσy and, for n = 3, γ₃ = iσz.
pub fn build_rep(n: usize) -> Result<CliffordRep> {
    if n != 2 && n != 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    let all = [pauli_x() * I, pauli_y() * I, pauli_z() * I];
    Ok(CliffordRep {
        n,
        gammas: all[..n].to_vec(),
    })
}

impl CliffordRep {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Spinor rank 2^⌊n/2⌋.
    pub fn m(&self) -> usize {
        2
    }

    pub fn gamma(&self, a: usize) -> &M2 {
        &self.gammas[a]
    }

    pub fn gammas(&self) -> &[M2] {
        &self.gammas
    }

    /// Σ_a v_a γ_a for frame components v.
    pub fn vector_matrix(&self, v: &[f64]) -> M2 {
        self.gammas
            .iter()
            .zip(v)
            .fold(M2::zeros(), |acc, (g, &c)| acc + g * Complex64::new(c, 0.0))
    }

    /// Clifford multiplication v·ψ.
    pub fn clifford_vector(&self, v: &[f64], psi: &Spinor) -> Result<Spinor> {
        if v.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "vector has {} components, expected {}",
                v.len(),
                self.n
            )));
        }
        Ok(self.vector_matrix(v) * psi)
    }

    /// Matrix of c(v∧w) = ½(v·w − w·v).
    pub fn two_form_matrix(&self, v: &[f64], w: &[f64]) -> M2 {
        let a = self.vector_matrix(v);
        let b = self.vector_matrix(w);
        (a * b - b * a) * Complex64::new(0.5, 0.0)
    }

    pub fn two_form_action(&self, v: &[f64], w: &[f64], psi: &Spinor) -> Result<Spinor> {
        if v.len() != self.n || w.len() != self.n {
            return Err(Error::InvalidParameter("two-form arguments have wrong dimension".into()));
        }
        Ok(self.two_form_matrix(v, w) * psi)
    }

    /// Action ¼ Σ_{a,b} A_ab γ_a γ_b of an antisymmetric frame endomorphism.
    pub fn bivector_matrix(&self, a: &[[f64; 3]; 3]) -> M2 {
        let mut out = M2::zeros();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && a[i][j] != 0.0 {
                    out += self.gammas[i] * self.gammas[j] * Complex64::new(0.25 * a[i][j], 0.0);
                }
            }
        }
        out
    }

    /// The representation U γ_a U† for a unitary U.
    pub fn conjugated(&self, u: &M2) -> CliffordRep {
        let ud = u.adjoint();
        CliffordRep {
            n: self.n,
            gammas: self.gammas.iter().map(|g| u * g * ud).collect(),
        }
    }

    /// Largest entry of |γ_aγ_b + γ_bγ_a + 2δ_ab| and |γ_a† + γ_a|.
    pub fn relation_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                let mut m = self.gammas[a] * self.gammas[b] + self.gammas[b] * self.gammas[a];
                if a == b {
                    m += M2::identity() * Complex64::new(2.0, 0.0);
                }
                worst = worst.max(m.iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
            let skew = self.gammas[a].adjoint() + self.gammas[a];
            worst = worst.max(skew.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        worst
    }
}

/// Spin lift exp(½θ γ_aγ_b) of the rotation by angle θ in the (a, b) plane.
pub fn plane_rotation_lift(rep: &CliffordRep, a: usize, b: usize, theta: f64) -> M2 {
    let (s, c) = (0.5 * theta).sin_cos();
    M2::identity() * Complex64::new(c, 0.0) + rep.gamma(a) * rep.gamma(b) * Complex64::new(s, 0.0)
}
