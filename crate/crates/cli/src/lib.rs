//! Library surface of the command-line front end, exposed for integration
//! tests: configuration, commands and manifest writing.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::Path;

pub use commands::CliError;
use config::RunConfig;

/// Load a config file and dispatch one subcommand.
pub fn run_command(command: &str, config_path: &Path) -> Result<(), CliError> {
    let (cfg, bytes) = RunConfig::load(config_path)?;
    match command {
        "simulate" => commands::cmd_simulate(&cfg, &bytes),
        "fit" => commands::cmd_fit(&cfg, &bytes),
        "irf" => commands::cmd_irf(&cfg, &bytes),
        "flp" => commands::cmd_flp(&cfg, &bytes),
        "mc" => commands::cmd_mc(&cfg, &bytes),
        "mise-cv" => commands::cmd_mise_cv(&cfg, &bytes),
        other => Err(CliError::Config(format!("unknown command '{other}'"))),
    }
}
