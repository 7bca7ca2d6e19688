//! Low Dirac spectrum of the flat torus and the Friedrich inequality.

use std::f64::consts::PI;

use serde_json::json;
use spinflow::functionals::{dirac_low_spectrum, friedrich_check, EigenOptions};
use spinflow::grid::{Grid, TensorField};

use super::random_data;
use crate::{Check, CliError, Report, RunConfig};

/// Smallest nonzero plane-wave eigenvalue 2π|k| on the unit square lattice.
pub fn plane_wave_gap() -> f64 {
    2.0 * PI
}

pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let grid = Grid::new(cfg.n, cfg.res)?;
    let opts = EigenOptions::default();
    // the trivial spin structure has a 2-dimensional kernel, so the third
    // computed value is the first nonzero one
    let vals = dirac_low_spectrum(&TensorField::identity_metric(grid), 3, &opts)?;
    let mut friedrich = Vec::new();
    let mut holds = true;
    for seed in cfg.seed_list() {
        let (g, f, _) = random_data(cfg.n, cfg.res, seed, cfg.amp)?;
        let chk = friedrich_check(&g, &f, &opts)?;
        holds &= chk.holds;
        friedrich.push(json!({"seed": seed, "check": chk}));
    }
    let checks = vec![
        Check::below("flat_lambda1", vals[0].abs().max(vals[1].abs()), 1e-6),
        Check::below("flat_first_nonzero", (vals[2] - plane_wave_gap()).abs(), 1e-6),
        Check::flag("friedrich_inequality", holds, format!("{} sampled (g, f)", friedrich.len())),
    ];
    Ok(Report::new(
        "spectrum",
        &cfg.hash(),
        checks,
        json!({"flat_low_spectrum": vals, "plane_wave_gap": plane_wave_gap(), "friedrich": friedrich}),
    ))
}
