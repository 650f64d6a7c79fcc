//! `calg`: simulate and verify contact (Herglotz) mechanics on Lie
//! algebroids from a JSON scenario configuration.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 configuration or
//! parse error, 3 numerical failure.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use config::CmdError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "calg",
    about = "Contact Lagrangian/Hamiltonian dynamics on Lie algebroids",
    version
)]
struct Cli {
    /// Scenario configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Override the config's sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Suppress the per-check report on stdout.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured system and write trajectory.csv.
    Simulate,
    /// Run the configured invariant checks and write checks.csv.
    Check,
    /// Compare the Herglotz flow with the induced contact Hamilton flow.
    LegendreCompare,
    /// Evaluate Hamilton-Jacobi residuals on a grid (and optionally the
    /// projected-dynamics gap).
    HjCheck,
}

fn run(cli: &Cli) -> Result<bool, CmdError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CmdError::Config("--config <path> is required".into()))?;
    let scenario = config::load(config_path, cli.seed)?;
    let outcome = match cli.command {
        Command::Simulate => commands::simulate(&scenario, &cli.out, cli.quiet)?,
        Command::Check => commands::check(&scenario, &cli.out, cli.quiet)?,
        Command::LegendreCompare => commands::legendre_compare(&scenario, &cli.out, cli.quiet)?,
        Command::HjCheck => commands::hj_check(&scenario, &cli.out, cli.quiet)?,
    };
    Ok(outcome.all_passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e @ CmdError::Config(_)) => {
            eprintln!("{}", e);
            ExitCode::from(2)
        }
        Err(e @ CmdError::Numerics(_)) => {
            eprintln!("{}", e);
            ExitCode::from(3)
        }
    }
}
