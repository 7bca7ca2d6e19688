//! Resolution and time-step refinement tables.

use std::f64::consts::PI;

use serde_json::json;
use spinflow::flow::{perturbed_flat_start, stable_dt, step_rk4, FlowState};
use spinflow::grid::{partial_derivative, Grid, LinearField, ScalarField, Scheme};

use super::{constants, verify};
use crate::{Check, CliError, Report, RunConfig};

fn resolutions(n: usize) -> Vec<usize> {
    if n == 2 {
        vec![16, 32, 64]
    } else {
        vec![8, 16, 32]
    }
}

/// Max error of ∂ₓ exp(sin 2πx) under the given scheme.
pub fn derivative_error(res: usize, scheme: Scheme) -> Result<f64, CliError> {
    let grid = Grid::new(2, res)?;
    let u = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin().exp());
    let exact = ScalarField::from_fn(grid, |x| {
        let s = 2.0 * PI * x[0];
        2.0 * PI * s.cos() * s.sin().exp()
    });
    Ok(partial_derivative(&u, 0, scheme)?.plus(&exact, -1.0).max_abs())
}

/// Ratio of successive differences of RK4 solutions at dt, dt/2, dt/4.
pub fn rk4_self_convergence(start: &FlowState, dt: f64, steps: usize) -> Result<f64, CliError> {
    let march = |h: f64, m: usize| -> Result<FlowState, CliError> {
        let mut s = start.clone();
        for _ in 0..m {
            s = step_rk4(&s, h)?;
        }
        Ok(s)
    };
    let a = march(dt, steps)?;
    let b = march(dt / 2.0, 2 * steps)?;
    let c = march(dt / 4.0, 4 * steps)?;
    let diff = |x: &FlowState, y: &FlowState| {
        x.g.plus(&y.g, -1.0).max_abs() + x.f.plus(&y.f, -1.0).max_abs() + x.psi.plus(&y.psi, -1.0).max_abs()
    };
    Ok(diff(&a, &b) / diff(&b, &c))
}

pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let k = constants(cfg)?;
    let seed = cfg.seed;
    let mut weitz = Vec::new();
    for res in resolutions(cfg.n) {
        let c = RunConfig { res, ..cfg.clone() };
        let v = verify::seed_values(&c, seed)?;
        weitz.push(json!({"res": res, "weitzenbock": v["weitzenbock"], "div_f_t_identity": v["div_f_t_identity"]}));
    }
    let last = |key: &str| weitz.last().and_then(|r| r[key].as_f64()).unwrap_or(f64::NAN);
    let refined = weitz.windows(2).all(|w| {
        let (a, b) = (w[0]["weitzenbock"].as_f64().unwrap_or(f64::NAN), w[1]["weitzenbock"].as_f64().unwrap_or(f64::NAN));
        b <= a || b < 1e-11
    });

    let scheme: Scheme = cfg.scheme.into();
    let derr: Vec<(usize, f64)> = [16, 32, 64]
        .into_iter()
        .map(|r| derivative_error(r, scheme).map(|e| (r, e)))
        .collect::<Result<_, _>>()?;
    let orders: Vec<f64> = derr.windows(2).map(|w| (w[0].1 / w[1].1).log2()).collect();

    let grid = Grid::new(2, 16)?;
    let start = perturbed_flat_start(grid, seed, cfg.amp.max(1e-2), k)?;
    let ratio = rk4_self_convergence(&start, stable_dt(&grid, &k), 8)?;

    let mut checks = vec![
        Check::flag("weitzenbock_refines", refined, "residual non-increasing under res doubling"),
        Check::below("weitzenbock_finest", last("weitzenbock"), 1e-7),
        Check::below("div_f_t_finest", last("div_f_t_identity"), 1e-6),
        Check::below("rk4_fourth_order", (ratio / 16.0).ln().abs(), 0.25_f64.ln().abs())
            .with_detail(format!("self-convergence ratio {ratio:.2} (16 for fourth order)")),
    ];
    match scheme {
        Scheme::Fd4 => {
            let o = orders.last().copied().unwrap_or(f64::NAN);
            checks.push(Check::below("fd4_order", (4.0 - o).abs(), 0.5).with_detail(format!("observed order {o:.2}")));
        }
        Scheme::Spectral => {
            checks.push(Check::below("spectral_derivative_finest", derr.last().map_or(f64::NAN, |d| d.1), 1e-10));
        }
    }
    Ok(Report::new(
        "convergence",
        &cfg.hash(),
        checks,
        json!({
            "identity_residuals": weitz,
            "derivative_errors": derr.iter().map(|(r, e)| json!({"res": r, "error": e})).collect::<Vec<_>>(),
            "derivative_orders": orders,
            "rk4_self_convergence_ratio": ratio,
        }),
    ))
}
