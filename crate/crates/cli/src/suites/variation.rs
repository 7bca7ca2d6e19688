//! First variation of 𝕎_λ and the integral evolution formulas against
//! central differences along linear paths.

use serde_json::json;
use spinflow::grid::Grid;
use spinflow::variation::{first_variation_fd, first_variation_rhs, integral_evolution_check, VariationDirection};

use super::{constants, random_data, worst};
use crate::{Check, CliError, Report, RunConfig};

pub const EPSILONS: [f64; 3] = [1e-2, 1e-3, 1e-4];
const TAU_DOT: f64 = 0.4;

pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let k = constants(cfg)?;
    let grid = Grid::new(cfg.n, cfg.res)?;
    let mut rows = Vec::new();
    let (mut rel_fine, mut ratios, mut evo) = (Vec::new(), Vec::new(), Vec::new());
    for seed in cfg.seed_list() {
        let (g, f, psi) = random_data(cfg.n, cfg.res, seed, cfg.amp)?;
        let dir = VariationDirection::random(grid, seed.wrapping_add(1000), 2, TAU_DOT)?;
        let formula = first_variation_rhs(&g, &f, &psi, &k, &dir)?;
        let mut errs = Vec::new();
        for eps in EPSILONS {
            errs.push((first_variation_fd(&g, &f, &psi, &k, &dir, eps)? - formula).abs());
        }
        rel_fine.push(errs[2] / (formula.abs() + 1.0));
        // error ratio over one decade of ε; 100 for a clean O(ε²)
        let ratio = if errs[0] < 1e-10 { f64::INFINITY } else { errs[0] / errs[1] };
        ratios.push(ratio);
        let checks = integral_evolution_check(&g, &f, &psi, &k, &dir, 1e-4)?;
        evo.push(worst(&checks.iter().map(|c| c.relative).collect::<Vec<_>>()));
        rows.push(json!({
            "seed": seed,
            "formula": formula,
            "fd_errors": EPSILONS.iter().zip(&errs).map(|(e, r)| json!({"epsilon": e, "error": r})).collect::<Vec<_>>(),
            "integral_evolution": checks,
        }));
    }
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::below("first_variation_relative_error", worst(&rel_fine), 1e-5),
        Check::below("first_variation_second_order", 50.0 / min_ratio, 1.0)
            .with_detail(format!("smallest error ratio per decade of epsilon: {min_ratio:.1}")),
        Check::below("integral_evolution_relative_error", worst(&evo), 1e-6),
    ];
    Ok(Report::new(
        "variation",
        &cfg.hash(),
        checks,
        json!({"tau_dot": TAU_DOT, "cases": rows}),
    ))
}
