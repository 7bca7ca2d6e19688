//! Run configuration: a flat JSON document, validated before anything runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spinflow::grid::Scheme;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Verify,
    Variation,
    Flow,
    Symbols,
    Spectrum,
    Convergence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Verify => "verify",
            Self::Variation => "variation",
            Self::Flow => "flow",
            Self::Symbols => "symbols",
            Self::Spectrum => "spectrum",
            Self::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Spectral,
    Fd4,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Spectral => Scheme::Spectral,
            SchemeName::Fd4 => Scheme::Fd4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    pub res: usize,
    /// Base seed; the suites use `seeds` when it is non-empty and
    /// `seed, seed + 1, ..., seed + 4` otherwise.
    pub seed: u64,
    pub seeds: Vec<u64>,
    /// Amplitude of the random perturbations of the flat data.
    pub amp: f64,
    pub tau: f64,
    pub lambda: f64,
    pub c: f64,
    /// Time step; the RK4 stability bound is used when absent.
    pub dt: Option<f64>,
    pub steps: usize,
    pub scheme: SchemeName,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Verify,
            n: 2,
            res: 64,
            seed: 0,
            seeds: Vec::new(),
            amp: 0.05,
            tau: 1.0,
            lambda: 0.0,
            c: 2.0,
            dt: None,
            steps: 200,
            scheme: SchemeName::Spectral,
            output_dir: PathBuf::from("spinflow-out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.n != 2 && self.n != 3 {
            return bad(format!("n must be 2 or 3, got {}", self.n));
        }
        if self.res < 8 || !self.res.is_power_of_two() {
            return bad(format!("res must be a power of two >= 8, got {}", self.res));
        }
        if !(self.amp >= 0.0 && self.amp * (self.n as f64) < 1.0) {
            return bad(format!("amp must satisfy 0 <= amp < 1/n, got {}", self.amp));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("c must be positive, got {}", self.c));
        }
        if !self.lambda.is_finite() {
            return bad("lambda must be finite".into());
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if self.seed_list().is_empty() {
            return bad("no seeds".into());
        }
        Ok(())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (self.seed..self.seed + 5).collect()
        } else {
            self.seeds.clone()
        }
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory so
    /// that the same run written to two places hashes identically.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
