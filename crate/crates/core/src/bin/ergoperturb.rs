use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ergoperturb::harness::{self, Experiment, ExperimentConfig};

/// Run an ergoperturb experiment from a flat JSON config.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// One of: drift-certify, rate-table, continuity-profile, holder-check,
    /// lipschitz-check, counterexample, taylor-expansion, kartashov-compare, mc-oracle
    experiment: String,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides ERGOPERTURB_OUT_DIR and the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check the config and exit
    #[arg(long)]
    validate_only: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exp: Experiment = match cli.experiment.parse() {
        Ok(e) => e,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let config = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", cli.config.display());
            return ExitCode::from(1);
        }
    };
    if cli.validate_only {
        return match harness::validate(exp, &config) {
            Ok(()) => {
                println!("config ok");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(e.exit_code() as u8)
            }
        };
    }
    let dir = harness::resolve_out_dir(cli.out.as_deref(), &config);
    match harness::run(exp, &config, &dir) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
