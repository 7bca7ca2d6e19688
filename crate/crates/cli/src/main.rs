use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use spinflow_cli::{run, Command, RunConfig};

/// Verification suites, flow runs and symbol reports for the spinorial
/// entropy on flat tori.
#[derive(Debug, Parser)]
#[command(name = "spinflow", version)]
struct Args {
    /// JSON run configuration; defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the command in the configuration.
    #[arg(long, value_enum)]
    command: Option<Command>,
    /// Overrides the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overrides the base seed and clears any explicit seed list.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut cfg = match &args.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(c) = args.command {
        cfg.command = c;
    }
    if let Some(o) = args.output {
        cfg.output_dir = o;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
        cfg.seeds.clear();
    }
    match run(&cfg) {
        Ok(out) => {
            for c in &out.report.checks {
                let mark = if c.passed { "PASS" } else { "FAIL" };
                println!("{mark} {:<40} {:>12.3e} (tol {:.1e})", c.name, c.value, c.tolerance);
            }
            println!(
                "{} {}: {} -> {}",
                if out.report.passed { "PASS" } else { "FAIL" },
                out.report.command,
                out.report.config_hash,
                out.report_path.display()
            );
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
