//! `fvar`: batch front end for the functional VAR pipeline.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on data errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fvar_cli::commands::{cmd_gini, CliError};
use fvar_cli::run_command;

#[derive(Parser)]
#[command(
    name = "fvar",
    version,
    about = "Functional structural VAR pipeline: simulate, fit, and map structural shocks into distributional responses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a built-in data-generating process to CSV files
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimate densities, components and the VAR posterior from CSV inputs
    Fit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Distributional impulse responses from the fitted posterior
    Irf {
        #[arg(long)]
        config: PathBuf,
    },
    /// Distributional responses by functional local projections
    Flp {
        #[arg(long)]
        config: PathBuf,
    },
    /// Monte Carlo correlation study on a built-in design
    Mc {
        #[arg(long)]
        config: PathBuf,
    },
    /// Cross-validated transform comparison on a built-in design
    MiseCv {
        #[arg(long)]
        config: PathBuf,
    },
    /// Gini coefficient of a density curve file
    Gini {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config } => run_command("simulate", config),
        Command::Fit { config } => run_command("fit", config),
        Command::Irf { config } => run_command("irf", config),
        Command::Flp { config } => run_command("flp", config),
        Command::Mc { config } => run_command("mc", config),
        Command::MiseCv { config } => run_command("mise-cv", config),
        Command::Gini { input, out } => cmd_gini(input, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("data error: {msg}");
            ExitCode::from(3)
        }
    }
}
