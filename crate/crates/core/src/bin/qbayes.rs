use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qbayes::reports::{run, Command};

/// Optimal Bayesian decision functions for Gaussian quantum channels.
#[derive(Parser)]
#[command(name = "qbayes", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file (TOML)
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "qbayes_out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Sub {
    /// Coherent-projector resolution of the identity on nested grids
    CheckIdentity(Common),
    /// Optimal decision function and its risk for the scenario cost
    Risk(Common),
    /// Optimal two-hypothesis test
    Binary(Common),
    /// Entropy-regularized decision functions along the epsilon schedule
    Regularize(Common),
    /// Monte-Carlo risk of the ancilla measurement
    Simulate(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::CheckIdentity(c) => (Command::CheckIdentity, c),
        Sub::Risk(c) => (Command::Risk, c),
        Sub::Binary(c) => (Command::Binary, c),
        Sub::Regularize(c) => (Command::Regularize, c),
        Sub::Simulate(c) => (Command::Simulate, c),
    };
    let code = run(command, &common.scenario, common.seed, &common.out);
    ExitCode::from(code as u8)
}
