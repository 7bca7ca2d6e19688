//! The identity suite: Clifford algebra, connection, Weitzenböck, the
//! div_f T identity, integral identities and the restriction identities.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde_json::json;
use spinflow::clifford::{build_rep, inner, re_inner};
use spinflow::functionals::{
    bo_energy_of, classical_functionals, w_lambda_dirac_form_of, w_lambda_of, Evaluation,
};
use spinflow::geometry::{weighted_scalar_ops, GeometryCache};
use spinflow::grid::{
    flat_integral, partial_derivative, weighted_measure, integrate, Grid, LinearField, ScalarField, Scheme,
};
use spinflow::random::BandLimited;
use spinflow::spinor::{
    covariant_derivative_spinor, dirac_f, div_f_t_identity_residual, kosmann_lie, laplacian_f_spinor,
    re_inner_field, spinor_tensors, SpinGeometry,
};

use super::{harmonic_data, random_data, rel, worst};
use crate::{Check, CliError, Report, RunConfig};

/// (name, tolerance) of every check, in report order.
pub const CHECKS: [(&str, f64); 18] = [
    ("clifford_relations", 1e-14),
    ("clifford_skew_adjointness", 1e-13),
    ("weitzenbock", 1e-8),
    ("weitzenbock_norm_form", 1e-7),
    ("div_f_t_identity", 1e-6),
    ("weighted_scalar_curvature", 1e-10),
    ("spinor_connection_compatibility", 1e-10),
    ("connection_antisymmetry", 1e-10),
    ("gauss_bonnet", 1e-7),
    ("weighted_laplacian_integral", 1e-8),
    ("weighted_dirac_symmetry", 1e-8),
    ("kosmann_norm_transport", 1e-9),
    ("trace_of_s", 1e-12),
    ("entropy_two_forms", 1e-9),
    ("harmonic_spinor", 1e-8),
    ("restriction_w1_perelman_w", 1e-9),
    ("restriction_w0_perelman_f", 1e-9),
    ("restriction_w0_bo_energy", 1e-9),
];

fn field_rel(a: &ScalarField, b: &ScalarField) -> f64 {
    a.plus(b, -1.0).max_abs() / a.max_abs().max(b.max_abs()).max(1e-300)
}

/// Values of every check for one seed.
pub fn seed_values(cfg: &RunConfig, seed: u64) -> Result<BTreeMap<&'static str, f64>, CliError> {
    let (n, res, amp) = (cfg.n, cfg.res, cfg.amp);
    let grid = Grid::new(n, res)?;
    let (g, f, psi) = random_data(n, res, seed, amp)?;
    let mut rng = BandLimited::new(grid, seed.wrapping_add(7919), 2)?;
    let phi = rng.spinor(1.0);
    let x = rng.vector(1.0);
    let scalar = rng.scalar(1.0);
    let rep = build_rep(n)?;
    let geo = GeometryCache::new(&g)?;
    let w = weighted_scalar_ops(&geo, &f)?;
    let sg = SpinGeometry::new(geo.clone(), rep.clone())?;
    let mut out = BTreeMap::new();

    out.insert("clifford_relations", rep.relation_defect());
    let mut skew: f64 = 0.0;
    for p in (0..grid.len()).step_by(97) {
        let v = &x.vec_at(p)[..n];
        let (a, b) = (psi.at(p), phi.at(p));
        let va = rep.clifford_vector(v, &a)?;
        let vb = rep.clifford_vector(v, &b)?;
        skew = skew.max(re_inner(&va, &a).abs() / a.norm_squared().max(1e-300));
        skew = skew.max((inner(&va, &b) + inner(&a, &vb)).norm() / (a.norm() * b.norm()).max(1e-300));
    }
    out.insert("clifford_skew_adjointness", skew);

    let dpsi = dirac_f(&psi, &sg, &w)?;
    let dd = dirac_f(&dpsi, &sg, &w)?;
    let lap = laplacian_f_spinor(&psi, &sg, Some(&w))?;
    let rhs = lap.scaled(-1.0).map_points(|p, v| v + psi.at(p) * Complex64::new(0.25 * w.r_f.data[p], 0.0));
    out.insert("weitzenbock", dd.plus(&rhs, -1.0).max_abs() / dd.max_abs());

    let norm = psi.norm_sq();
    let jet = covariant_derivative_spinor(&psi, &sg)?;
    let lhs = w.laplacian_f(&geo, &norm).scaled(2.0);
    let rhs = w
        .r_f
        .zip_map(&norm, |a, b| a * b)
        .plus(&jet.norm_sq(), 4.0)
        .plus(&re_inner_field(&dd, &psi), -4.0);
    out.insert("weitzenbock_norm_form", field_rel(&lhs, &rhs));

    let tens = spinor_tensors(&psi, &sg, &w)?;
    let div_t = w.div_f(&geo, &tens.t);
    out.insert(
        "div_f_t_identity",
        div_f_t_identity_residual(&psi, &sg, &w)?.max_abs() / div_t.max_abs(),
    );

    let lf = w.laplacian_f(&geo, &f);
    let rf = geo.scalar.plus(&w.grad_f_sq, 1.0).plus(&lf, 2.0);
    out.insert("weighted_scalar_curvature", field_rel(&w.r_f, &rf));

    let mut compat: f64 = 0.0;
    for i in 0..n {
        let d = partial_derivative(&norm, i, Scheme::Spectral)?;
        let r = re_inner_field(&jet.coord[i], &psi).scaled(2.0);
        compat = compat.max(field_rel(&d, &r));
    }
    out.insert("spinor_connection_compatibility", compat);

    let mut anti: f64 = 0.0;
    for om in &geo.omega {
        for i in 0..n {
            for a in 0..n {
                for b in 0..n {
                    anti = anti.max((om[i][a][b] + om[i][b][a]).abs());
                }
            }
        }
    }
    out.insert("connection_antisymmetry", anti);

    // ∫R dμ = 0 is a statement about surfaces; skipped in 3D
    if n == 2 {
        let v: Vec<f64> = (0..grid.len()).map(|p| geo.scalar.data[p] * geo.sqrt_det[p]).collect();
        out.insert("gauss_bonnet", flat_integral(&grid, &v).abs());
    }

    let m = weighted_measure(&g, &f, cfg.tau)?;
    let lap_s = w.laplacian_f(&geo, &scalar);
    out.insert(
        "weighted_laplacian_integral",
        integrate(&lap_s, &m)?.abs() / (lap_s.max_abs() * m.total()),
    );

    let pair = |a: &spinflow::grid::SpinorField, b: &spinflow::grid::SpinorField| {
        integrate(&re_inner_field(a, b), &m)
    };
    let l = pair(&dirac_f(&phi, &sg, &w)?, &psi)?;
    let r = pair(&phi, &dpsi)?;
    out.insert("weighted_dirac_symmetry", (l - r).abs() / l.abs().max(r.abs()).max(1.0));

    let lie = kosmann_lie(&x, &psi, &sg)?;
    let lhs = re_inner_field(&lie, &psi).scaled(2.0);
    let mut rhs = ScalarField::zeros(grid);
    for i in 0..n {
        let d = partial_derivative(&norm, i, Scheme::Spectral)?;
        rhs = rhs.plus(&d.zip_map(&ScalarField::new(grid, x.comps[i].clone())?, |a, b| a * b), 1.0);
    }
    out.insert("kosmann_norm_transport", field_rel(&lhs, &rhs));

    let d = spinflow::spinor::dirac(&psi, &sg)?;
    out.insert("trace_of_s", field_rel(&geo.trace(&tens.s), &re_inner_field(&dpsi, &d).scaled(2.0)));

    let ev = Evaluation::new(&g, &f, &psi, cfg.tau)?;
    let (a, b) = (w_lambda_of(&ev, cfg.lambda), w_lambda_dirac_form_of(&ev, cfg.lambda));
    out.insert("entropy_two_forms", (a - b).abs() / (1.0 + a.abs()));

    let (hg, hf, hpsi) = harmonic_data(n, res, seed, 2.0 * amp)?;
    let tau = cfg.tau;
    let ev = Evaluation::new(&hg, &hf, &hpsi, tau)?;
    out.insert("harmonic_spinor", ev.df_psi.max_abs() / hpsi.max_abs());
    let (big_f, big_w) = classical_functionals(&hg, &hf, tau)?;
    let norm_c = (4.0 * PI * tau).powf(-(n as f64) / 2.0);
    out.insert("restriction_w1_perelman_w", rel(w_lambda_of(&ev, 1.0), -big_w));
    out.insert("restriction_w0_perelman_f", rel(w_lambda_of(&ev, 0.0), -tau * norm_c * big_f));
    let ev1 = Evaluation::new(&hg, &hf, &hpsi, 1.0)?;
    out.insert(
        "restriction_w0_bo_energy",
        rel(w_lambda_of(&ev1, 0.0), (4.0 * PI).powf(-(n as f64) / 2.0) * bo_energy_of(&ev1)),
    );
    Ok(out)
}

pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let seeds = cfg.seed_list();
    let mut per_seed = Vec::new();
    for &s in &seeds {
        per_seed.push(seed_values(cfg, s)?);
    }
    let checks = CHECKS
        .iter()
        .filter(|(name, _)| per_seed.iter().all(|m| m.contains_key(name)))
        .map(|&(name, tol)| {
            let vals: Vec<f64> = per_seed.iter().map(|m| m[name]).collect();
            Check::below(name, worst(&vals), tol)
        })
        .collect();
    let table: Vec<_> = seeds.iter().zip(&per_seed).map(|(s, m)| json!({"seed": s, "values": m})).collect();
    Ok(Report::new(
        "verify",
        &cfg.hash(),
        checks,
        json!({"n": cfg.n, "res": cfg.res, "amp": cfg.amp, "per_seed": table}),
    ))
}
