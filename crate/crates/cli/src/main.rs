//! `distcurve` runs one scenario described by a JSON config document and
//! prints a deterministic report. Exit codes: 0 the scenario ran and passed,
//! 1 it ran and failed its gate, 2 the config or a referenced file is
//! unusable, 3 the computation broke down numerically.

mod config;
mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

#[derive(Parser)]
#[command(
    name = "distcurve",
    version,
    about = "distinguished-curve scenario runner"
)]
struct Cli {
    /// JSON scenario document.
    #[arg(long)]
    config: PathBuf,
    /// Directory for the report (and CSV trace for integrations).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for every randomized battery in the scenario.
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Overrides the config's tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let raw = match fs::read(&cli.config) {
        Ok(raw) => raw,
        Err(e) => {
            eprintln!("config error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let parsed = match config::parse(&raw, cli.tol) {
        Ok(parsed) => parsed,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(2);
        }
    };

    match run::execute(&parsed, &raw, cli.seed, cli.out.as_deref()) {
        Ok(output) => {
            print!("{}", output.report);
            if output.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(run::RunError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(run::RunError::Numerical(msg)) => {
            eprintln!("numerical breakdown: {msg}");
            ExitCode::from(3)
        }
    }
}
