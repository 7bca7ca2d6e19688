use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spinflow_cli::report::read_flow_csv;
use spinflow_cli::{Report, RunConfig};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spinflow-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn spinflow(config: &serde_json::Value, dir: &Path) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, config.to_string()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_spinflow"))
        .arg("--config")
        .arg(&path)
        .arg("--output")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn load_report(dir: &Path, command: &str) -> Report {
    let text = std::fs::read_to_string(dir.join("out").join(format!("{command}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn verify_with_defaults_passes() {
    let dir = scratch("verify");
    let out = Command::new(env!("CARGO_BIN_EXE_spinflow"))
        .args(["--command", "verify", "--output"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    let report = load_report(&dir, "verify");
    assert!(report.passed);
    assert!(report.checks.len() >= 12);
    assert_eq!(report.config_hash, RunConfig::default().hash());
    assert!(dir.join("out/verify.meta.json").exists());
}

#[test]
fn flow_outside_the_forward_regime_exits_2() {
    for (c, word) in [(0.5, "backward-parabolic"), (1.0, "degenerate")] {
        let dir = scratch(&format!("regime-{c}"));
        let out = spinflow(&serde_json::json!({"command": "flow", "res": 16, "tau": 1.0, "c": c}), &dir);
        assert_eq!(out.status.code(), Some(2));
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.contains(word), "{stderr}");
        assert!(!dir.join("out/flow.csv").exists());
    }
}

#[test]
fn flow_at_the_critical_configuration_is_stationary() {
    let dir = scratch("critical");
    let cfg = serde_json::json!({"command": "flow", "res": 16, "amp": 0.0, "lambda": 0.0, "steps": 20});
    let out = spinflow(&cfg, &dir);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let (hash, rows) = read_flow_csv(&dir.join("out/flow.csv")).unwrap();
    assert_eq!(rows.len(), 21);
    let w0 = rows[0].w_lambda;
    for r in &rows {
        assert!((r.w_lambda - w0).abs() <= 1e-12 * w0.abs().max(1.0), "{} vs {w0}", r.w_lambda);
        assert!(r.accepted);
    }
    let parsed: RunConfig = serde_json::from_value(cfg).unwrap();
    assert_eq!(hash, parsed.hash());
    assert_eq!(load_report(&dir, "flow").config_hash, hash);
    for f in ["state_g", "state_f", "state_psi"] {
        assert!(std::fs::read_dir(dir.join("out")).unwrap().any(|e| e
            .unwrap()
            .file_name()
            .to_string_lossy()
            .starts_with(f)));
    }
}

#[test]
fn reports_are_deterministic() {
    let cfg = serde_json::json!({"command": "verify", "res": 32, "seeds": [3, 4]});
    let a = scratch("det-a");
    let b = scratch("det-b");
    assert_eq!(spinflow(&cfg, &a).status.code(), Some(0));
    assert_eq!(spinflow(&cfg, &b).status.code(), Some(0));
    let ra = std::fs::read_to_string(a.join("out/verify.json")).unwrap();
    let rb = std::fs::read_to_string(b.join("out/verify.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn config_errors_exit_2() {
    let cases = [
        serde_json::json!({"resolution": 32}),
        serde_json::json!({"res": 48}),
        serde_json::json!({"n": 4}),
        serde_json::json!({"command": "flow", "res": 16, "scheme": "fd4"}),
        serde_json::json!({"tau": -1.0}),
    ];
    for (i, cfg) in cases.iter().enumerate() {
        let dir = scratch(&format!("bad-{i}"));
        let out = spinflow(cfg, &dir);
        assert_eq!(out.status.code(), Some(2), "{cfg}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn seed_override_changes_the_hash() {
    let dir = scratch("seed");
    let out = Command::new(env!("CARGO_BIN_EXE_spinflow"))
        .args(["--command", "verify", "--seed", "11", "--output"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = load_report(&dir, "verify");
    let cfg = RunConfig { seed: 11, ..RunConfig::default() };
    assert_eq!(report.config_hash, cfg.hash());
    assert_ne!(report.config_hash, RunConfig::default().hash());
}

#[test]
fn published_schema_matches_the_config() {
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../../../docs/config.schema.json")).unwrap();
    let props = schema["properties"].as_object().unwrap();
    let defaults = serde_json::to_value(RunConfig::default()).unwrap();
    let fields = defaults.as_object().unwrap();
    let mut a: Vec<&String> = props.keys().collect();
    let mut b: Vec<&String> = fields.keys().collect();
    a.sort();
    b.sort();
    assert_eq!(a, b);
    for (k, v) in fields {
        if k != "output_dir" {
            assert_eq!(&props[k]["default"], v, "default of {k}");
        }
    }
}
