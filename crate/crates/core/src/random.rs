//! Seeded band-limited random fields.
//!
//! Each draw fills the Fourier box |k_i| ≤ kmax with coefficients decaying like
//! 1/(1 + |k|²), transforms back, keeps the real part (equivalently, the
//! Hermitian-symmetrized spectrum) and rescales to the requested sup-norm.
//! Successive draws from one builder are independent; the sequence is fully
//! determined by the seed.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clifford::{pauli_x, pauli_y, pauli_z};
use crate::error::{Error, Result};
use crate::grid::{inverse_transform, Grid, ScalarField, Spinor, SpinorField, TensorField};

/// Builder for band-limited random fields on one grid.
#[derive(Debug, Clone)]
pub struct BandLimited {
    grid: Grid,
    kmax: usize,
    rng: ChaCha8Rng,
}

impl BandLimited {
    pub fn new(grid: Grid, seed: u64, kmax: usize) -> Result<Self> {
        let half = grid.res() / 2;
        if kmax == 0 || kmax >= half {
            return Err(Error::BandLimitTooLarge { kmax, half });
        }
        Ok(Self {
            grid,
            kmax,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Mean-free-or-not raw draw with unit sup-norm (or zero).
    fn unit_draw(&mut self) -> Vec<f64> {
        let grid = self.grid;
        let kmax = self.kmax as i64;
        let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (p, slot) in spec.iter_mut().enumerate() {
            let mut k2 = 0.0;
            let mut inside = true;
            for axis in 0..grid.n() {
                let k = grid.wavenumber(p, axis);
                inside &= k.abs() <= kmax;
                k2 += (k * k) as f64;
            }
            if inside {
                let re: f64 = self.rng.random_range(-1.0..1.0);
                let im: f64 = self.rng.random_range(-1.0..1.0);
                *slot = Complex64::new(re, im) / (1.0 + k2);
            }
        }
        inverse_transform(&grid, &mut spec);
        let data: Vec<f64> = spec.iter().map(|c| c.re).collect();
        let sup = data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if sup == 0.0 {
            return data;
        }
        data.into_iter().map(|x| x / sup).collect()
    }

    /// Real scalar field with sup-norm `amp`.
    pub fn scalar(&mut self, amp: f64) -> ScalarField {
        let data = self.unit_draw().into_iter().map(|x| amp * x).collect();
        ScalarField::new(self.grid, data).expect("grid-sized data")
    }

    /// Vector (or 1-form) field, each component with sup-norm `amp`.
    pub fn vector(&mut self, amp: f64) -> TensorField {
        let n = self.grid.n();
        let comps = (0..n).map(|_| self.scalar(amp).data).collect();
        TensorField::from_comps(self.grid, 1, comps).expect("grid-sized data")
    }

    /// Symmetric 2-tensor, each entry with sup-norm `amp`.
    pub fn sym2(&mut self, amp: f64) -> TensorField {
        let n = self.grid.n();
        let mut out = TensorField::zeros(self.grid, 2);
        for i in 0..n {
            for j in i..n {
                let d = self.scalar(amp).data;
                out.comps[i * n + j] = d.clone();
                out.comps[j * n + i] = d;
            }
        }
        out
    }

    /// δ + symmetric perturbation; the minimum eigenvalue is at least 1 − n·amp.
    pub fn metric(&mut self, amp: f64) -> Result<TensorField> {
        let n = self.grid.n();
        if !(amp >= 0.0 && amp * (n as f64) < 1.0) {
            return Err(Error::AmplitudeTooLarge { amp, n });
        }
        let mut g = self.sym2(amp);
        for i in 0..n {
            for v in g.comps[i * n + i].iter_mut() {
                *v += 1.0;
            }
        }
        Ok(g)
    }

    /// Complex spinor field; real and imaginary parts of each component have
    /// sup-norm `amp`.
    pub fn spinor(&mut self, amp: f64) -> SpinorField {
        let mut comp = || -> Vec<Complex64> {
            let re = self.scalar(amp).data;
            let im = self.scalar(amp).data;
            re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect()
        };
        let c0 = comp();
        let c1 = comp();
        SpinorField::from_comps(self.grid, [c0, c1]).expect("grid-sized data")
    }

    /// √c · exp(iθ·σ) χ₀ with band-limited θ of sup-norm `amp`; |ψ|² ≡ c|χ₀|².
    pub fn unit_spinor(&mut self, c: f64, chi0: Spinor, amp: f64) -> SpinorField {
        let theta: Vec<Vec<f64>> = (0..3).map(|_| self.scalar(amp).data).collect();
        let sig = [pauli_x(), pauli_y(), pauli_z()];
        let scale = Complex64::new(c.sqrt(), 0.0);
        SpinorField::from_fn_indexed(self.grid, |p| {
            let t = [theta[0][p], theta[1][p], theta[2][p]];
            let norm = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
            let mut u = Matrix2::identity() * Complex64::new(norm.cos(), 0.0);
            if norm > 0.0 {
                let s = norm.sin() / norm;
                for k in 0..3 {
                    u += sig[k] * Complex64::new(0.0, s * t[k]);
                }
            }
            u * chi0 * scale
        })
    }
}
