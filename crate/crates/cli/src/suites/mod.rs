//! One module per command. Each returns a [`Report`](crate::Report).

pub mod convergence;
pub mod flow;
pub mod spectrum;
pub mod symbols;
pub mod variation;
pub mod verify;

use num_complex::Complex64;
use spinflow::functionals::FlowConstants;
use spinflow::grid::{Grid, ScalarField, Spinor, SpinorField, Sym2Field, TensorField};
use spinflow::random::BandLimited;

use crate::{CliError, RunConfig};

pub(crate) fn constants(cfg: &RunConfig) -> Result<FlowConstants, CliError> {
    FlowConstants::new(cfg.tau, cfg.lambda, cfg.c).map_err(|e| CliError::Config(e.to_string()))
}

/// Worst value of `f` over the seeds.
pub(crate) fn worst(values: &[f64]) -> f64 {
    values.iter().cloned().fold(0.0, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
}

pub(crate) fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Random band-limited (g, f, ψ) near the flat data.
pub(crate) fn random_data(n: usize, res: usize, seed: u64, amp: f64) -> Result<(Sym2Field, ScalarField, SpinorField), CliError> {
    let mut rng = BandLimited::new(Grid::new(n, res)?, seed, 2)?;
    let g = rng.metric(amp)?;
    let f = rng.scalar(amp);
    let psi = rng.spinor(1.0);
    Ok((g, f, psi))
}

/// g = e^{2u}δ with ψ = e^{f/2}e^{-(n-1)u/2}χ, which satisfies D_fψ = 0.
pub(crate) fn harmonic_data(n: usize, res: usize, seed: u64, amp: f64) -> Result<(Sym2Field, ScalarField, SpinorField), CliError> {
    let grid = Grid::new(n, res)?;
    let mut rng = BandLimited::new(grid, seed, 2)?;
    let u = rng.scalar(amp);
    let f = rng.scalar(2.0 * amp);
    let mut g = TensorField::zeros(grid, 2);
    for p in 0..grid.len() {
        for i in 0..n {
            g.comps[i * n + i][p] = (2.0 * u.data[p]).exp();
        }
    }
    let chi = Spinor::new(Complex64::new(0.6, 0.2), Complex64::new(-0.3, 0.5));
    let psi = SpinorField::from_fn_indexed(grid, |p| {
        chi * Complex64::new((0.5 * f.data[p] - 0.5 * (n as f64 - 1.0) * u.data[p]).exp(), 0.0)
    });
    Ok((g, f, psi))
}
