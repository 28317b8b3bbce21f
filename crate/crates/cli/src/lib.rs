//! Command-line front end for `ctmc-bridge`.
//!
//! Exit codes: 0 ok, 1 internal or I/O failure, 2 usage, 3 rejection budget
//! exceeded, 4 unreachable endpoint, 5 complex spectrum, 6 insufficient
//! variation, 7 validation failure.

pub mod args;
pub mod commands;
pub mod formats;

use std::fmt;

use clap::Parser;
use ctmc_bridge::Error;

use crate::args::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
    Validation(String),
    Io(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub mod exit_code {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const REJECTION_BUDGET: i32 = 3;
    pub const UNREACHABLE: i32 = 4;
    pub const COMPLEX_SPECTRUM: i32 = 5;
    pub const INSUFFICIENT_VARIATION: i32 = 6;
    pub const VALIDATION: i32 = 7;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use exit_code::*;
        match self {
            CliError::Usage(_) => USAGE,
            CliError::Validation(_) => VALIDATION,
            CliError::Io(_) => FAILURE,
            CliError::Core(e) => match e {
                Error::RejectionBudgetExceeded { .. } => REJECTION_BUDGET,
                Error::UnreachableEndpoint { .. } => UNREACHABLE,
                Error::ComplexSpectrum(_) => COMPLEX_SPECTRUM,
                Error::InsufficientVariation(_) => INSUFFICIENT_VARIATION,
                Error::NumericalBreakdown(_) | Error::RootFindFailure(_) | Error::SeriesTruncation { .. } => FAILURE,
                _ => USAGE,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Core(e @ Error::ComplexSpectrum(_)) => write!(
                f,
                "{e}; direct sampling and exact cost prediction need a real spectrum, \
                 use --sampler uniformization or --sampler rejection"
            ),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Model(c) => commands::cmd_model(c),
        Command::Sample(c) => commands::cmd_sample(c),
        Command::Predict(c) => commands::cmd_predict(c),
        Command::Bench(c) => commands::cmd_bench(c),
        Command::Validate(c) => commands::cmd_validate(c),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit_code::USAGE } else { exit_code::OK };
        }
    };
    match run(&cli) {
        Ok(()) => exit_code::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
