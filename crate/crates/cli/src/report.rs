//! JSON reports, CSV series and run metadata.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Measured value (typically a worst-case residual).
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
            detail: None,
        }
    }

    pub fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: if passed { 1.0 } else { 0.0 },
            tolerance: 1.0,
            passed,
            detail: Some(detail.into()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub config_hash: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Command-specific tables.
    pub data: serde_json::Value,
}

impl Report {
    pub fn new(command: &str, config_hash: &str, checks: Vec<Check>, data: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            config_hash: config_hash.into(),
            passed: checks.iter().all(|c| c.passed),
            checks,
            data,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    command: &'a str,
    config_hash: &'a str,
    unix_time: u64,
    version: &'a str,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// Writes `<command>.json` and the timestamped `<command>.meta.json`.
pub fn write_report(dir: &Path, report: &Report) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    let path = dir.join(format!("{}.json", report.command));
    write_json(&path, report)?;
    let meta = Metadata {
        command: &report.command,
        config_hash: &report.config_hash,
        unix_time: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        version: env!("CARGO_PKG_VERSION"),
    };
    write_json(&dir.join(format!("{}.meta.json", report.command)), &meta)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub t: f64,
    #[serde(rename = "W_lambda")]
    pub w_lambda: f64,
    pub dissipation: f64,
    pub mass: f64,
    pub psi_norm_dev: f64,
    pub accepted: bool,
}

/// CSV with a leading `# config_hash: ...` comment line.
pub fn write_flow_csv(path: &Path, config_hash: &str, rows: &[FlowRow]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(path.to_path_buf(), e);
    let mut buf = format!("# config_hash: {config_hash}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(io)?;
    }
    std::fs::write(path, buf).map_err(io)
}

pub fn read_flow_csv(path: &Path) -> Result<(String, Vec<FlowRow>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    let hash = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# config_hash: "))
        .unwrap_or_default()
        .to_string();
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows = r.deserialize().collect::<Result<Vec<FlowRow>, _>>()?;
    Ok((hash, rows))
}
