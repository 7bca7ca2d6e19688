//! Principal-symbol report: numeric probes against the closed forms (both
//! the printed and the corrected ones), the Clifford pairing identities,
//! coercivity of A(ψ) and the parabolicity of the gauged system.

use serde::Serialize;
use serde_json::json;
use spinflow::clifford::build_rep;
use spinflow::flow::AForm;
use spinflow::linalg::identity;
use spinflow::symbols::{
    a_endomorphism, closed_form, coercivity, numeric_symbol_probe, pairing_identities, parabolicity_report,
    OperatorTag, ProbeOptions, SymbolForm, SymbolProbe, SymbolValue,
};
use spinflow::variation::regime_classify;

use super::{constants, worst};
use crate::{Check, CliError, Report, RunConfig};

pub const PAIRING_PROBES: u64 = 100;

/// Frequencies N at which each probe is extracted.
pub fn frequencies(n: usize) -> [usize; 3] {
    if n == 2 {
        [8, 16, 32]
    } else {
        [2, 4, 8]
    }
}

/// Integer directions ξ so that N·ξ is a lattice vector.
pub fn direction(n: usize, seed: u64) -> Vec<f64> {
    let two: [[f64; 2]; 4] = [[1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, -1.0]];
    let three: [[f64; 3]; 4] = [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, -1.0, 1.0], [0.0, 1.0, 1.0]];
    let i = (seed % 4) as usize;
    if n == 2 {
        two[i].to_vec()
    } else {
        three[i].to_vec()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub seed: u64,
    pub operator: OperatorTag,
    pub n_freq: usize,
    pub extracted: Vec<f64>,
    pub printed: Vec<f64>,
    pub corrected: Vec<f64>,
    pub printed_rel_error: f64,
    pub corrected_rel_error: f64,
}

fn rel_error(extracted: &SymbolValue, closed: &SymbolValue) -> f64 {
    let scale = closed.norm();
    let err = extracted.distance(closed);
    if scale > 1e-12 {
        err / scale
    } else {
        err
    }
}

pub fn probe_table(cfg: &RunConfig) -> Result<Vec<ProbeRow>, CliError> {
    let rep = build_rep(cfg.n)?;
    let mut rows = Vec::new();
    for seed in cfg.seed_list() {
        let xi = direction(cfg.n, seed);
        let p = SymbolProbe::random(cfg.n, seed, cfg.c, cfg.tau, false, Some(&xi))?;
        for tag in OperatorTag::ALL {
            let printed = closed_form(tag, &p, &rep, SymbolForm::Printed);
            let corrected = closed_form(tag, &p, &rep, SymbolForm::Corrected);
            for nf in frequencies(cfg.n) {
                let ex = numeric_symbol_probe(tag, &p, nf, ProbeOptions::default())?;
                rows.push(ProbeRow {
                    seed,
                    operator: tag,
                    n_freq: nf,
                    printed_rel_error: rel_error(&ex, &printed),
                    corrected_rel_error: rel_error(&ex, &corrected),
                    extracted: ex.components(),
                    printed: printed.components(),
                    corrected: corrected.components(),
                });
            }
        }
    }
    Ok(rows)
}

fn tag_name(tag: OperatorTag) -> &'static str {
    match tag {
        OperatorTag::Ric => "ric",
        OperatorTag::R => "scalar_curvature",
        OperatorTag::LieW => "lie_w_metric",
        OperatorTag::KosmannU => "kosmann_u",
        OperatorTag::KosmannW => "kosmann_w",
        OperatorTag::LapSpinor => "spinor_laplacian",
        OperatorTag::DivU => "div_u",
        OperatorTag::GaugedMetric => "gauged_metric",
        OperatorTag::GaugedSpinor => "gauged_spinor",
    }
}

/// Largest relative error at the top frequency, and whether the error never
/// grows with N beyond the differencing floor.
fn summarize(rows: &[ProbeRow], tag: OperatorTag, pick: fn(&ProbeRow) -> f64) -> (f64, bool) {
    let mine: Vec<&ProbeRow> = rows.iter().filter(|r| r.operator == tag).collect();
    let top = mine.iter().map(|r| r.n_freq).max().unwrap_or(0);
    let at_top = worst(&mine.iter().filter(|r| r.n_freq == top).map(|r| pick(r)).collect::<Vec<_>>());
    let mut non_increasing = true;
    for w in mine.windows(2) {
        if w[0].seed == w[1].seed && pick(w[1]) > pick(w[0]) * 1.01 + 1e-6 {
            non_increasing = false;
        }
    }
    (at_top, non_increasing)
}

pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let k = constants(cfg)?;
    let rep = build_rep(cfg.n)?;
    let rows = probe_table(cfg)?;
    let mut checks = Vec::new();
    for tag in OperatorTag::ALL {
        let name = tag_name(tag);
        let (c, c_mono) = summarize(&rows, tag, |r| r.corrected_rel_error);
        checks.push(
            Check::below(&format!("symbol_{name}"), c, 1e-6)
                .with_detail(if c_mono { "error non-increasing in N" } else { "error grows with N" }),
        );
        let (p, p_mono) = summarize(&rows, tag, |r| r.printed_rel_error);
        let mut chk = Check::below(&format!("symbol_{name}_printed_form"), p, 0.05);
        chk.passed &= p_mono;
        checks.push(chk.with_detail("closed form exactly as printed in the symbol lemmas"));
    }

    let mut pairing = Vec::new();
    for i in 0..PAIRING_PROBES {
        let p = SymbolProbe::random(cfg.n, 10_000 + i, cfg.c, cfg.tau, true, None)?;
        pairing.push(pairing_identities(&p, &rep).max_residual());
    }
    checks.push(Check::below("pairing_identities", worst(&pairing), 1e-12));

    let p = SymbolProbe::random(cfg.n, cfg.seed, cfg.c, cfg.tau, false, None)?;
    let mut coerc = Vec::new();
    for (form, name) in [
        (AForm::Printed, "a_coercivity_printed_form"),
        (AForm::Reordered, "a_coercivity_reordered"),
        (AForm::Derived, "a_coercivity_derived"),
    ] {
        let block = a_endomorphism(&p.psi, &rep, cfg.tau, &identity(cfg.n), form)?;
        let r = coercivity(&block, &p.psi, 360)?;
        checks.push(
            Check::below(name, (1.0 - r.coercivity).max(0.0), 1e-12)
                .with_detail(format!("min <A(xi,xi)s,s>/(|xi|^2|s|^2) = {:.6}", r.coercivity)),
        );
        coerc.push(r);
    }

    let regime = regime_classify(&k, cfg.n)?;
    let parab = parabolicity_report(&k, &p.psi, cfg.n)?;
    Ok(Report::new(
        "symbols",
        &cfg.hash(),
        checks,
        json!({
            "epsilon": ProbeOptions::default().eps,
            "frequencies": frequencies(cfg.n),
            "probes": rows,
            "pairing_worst": worst(&pairing),
            "coercivity": coerc,
            "regime": regime,
            "parabolicity": parab,
        }),
    ))
}
