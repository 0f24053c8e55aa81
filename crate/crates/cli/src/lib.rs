//! `aoi-lab`: solve post-sampling waits, evaluate the closed forms, simulate,
//! validate, and sweep parameter grids.

pub mod commands;
pub mod config;
pub mod output;

use std::fmt;
use std::io::Write;

use clap::Parser;

use crate::config::{expand_args, Cli, Command, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_UNSUPPORTED: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: EXIT_VALIDATION, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<aoi_core::Error> for CliError {
    fn from(e: aoi_core::Error) -> Self {
        let code = match e {
            aoi_core::Error::InfeasibleBudget { .. } => EXIT_INFEASIBLE,
            aoi_core::Error::UnsupportedClosedForm(_) => EXIT_UNSUPPORTED,
            _ => EXIT_CONFIG,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::config(format!("i/o error: {e}"))
    }
}

/// Runs one invocation and returns its exit code. `args[0]` is the program name.
pub fn run(args: Vec<String>, env_seed: Option<&str>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match try_run(args, env_seed, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.code
        }
    }
}

fn try_run(args: Vec<String>, env_seed: Option<&str>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let args = expand_args(args)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                write!(stdout, "{e}")?;
                return Ok(());
            }
            return Err(CliError::config(e.to_string().trim_end().trim_start_matches("error: ")));
        }
    };
    let cfg = ExperimentConfig::from_flags(cli.command.flags(), env_seed)?;
    match cli.command {
        Command::Zeta(_) => commands::cmd_zeta(&cfg, stdout),
        Command::Analyze(_) => commands::cmd_analyze(&cfg, stdout),
        Command::Simulate(_) => commands::cmd_simulate(&cfg, stdout, stderr),
        Command::Validate(_) => commands::cmd_validate(&cfg, stdout),
        Command::Sweep(_) => commands::cmd_sweep(&cfg, stdout),
    }
}
