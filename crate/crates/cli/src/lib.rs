//! Driver for the spinflow suites: configuration, dispatch and artifacts.

pub mod config;
pub mod report;
pub mod suites;

use std::path::PathBuf;

pub use config::{Command, RunConfig};
pub use report::{Check, Report};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error(transparent)]
    Core(spinflow::Error),

    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<spinflow::Error> for CliError {
    fn from(e: spinflow::Error) -> Self {
        match e {
            spinflow::Error::Regime(msg) => Self::Regime(msg),
            other => Self::Core(other),
        }
    }
}

impl CliError {
    /// 2 for configuration and regime errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Regime(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub report_path: PathBuf,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed {
            0
        } else {
            1
        }
    }
}

/// Validates the configuration, runs the selected command and writes its
/// artifacts into `output_dir`.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let report = match cfg.command {
        Command::Verify => suites::verify::run(cfg)?,
        Command::Variation => suites::variation::run(cfg)?,
        Command::Flow => suites::flow::run(cfg)?,
        Command::Symbols => suites::symbols::run(cfg)?,
        Command::Spectrum => suites::spectrum::run(cfg)?,
        Command::Convergence => suites::convergence::run(cfg)?,
    };
    let report_path = report::write_report(&cfg.output_dir, &report)?;
    Ok(Outcome { report, report_path })
}
