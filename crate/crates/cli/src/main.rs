//! `slu`: synthetic spoken-language-understanding experiments from the
//! command line.

mod args;
mod commands;
mod pipeline;

use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

use args::Cli;

/// Exit status 1.
pub const EXIT_USAGE: u8 = 1;
/// Exit status 2.
pub const EXIT_DATA: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// `module` names the component whose contract failed.
    #[error("[{module}] {source}")]
    Data {
        module: &'static str,
        #[source]
        source: slu_core::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

pub trait Context<T> {
    fn ctx(self, module: &'static str) -> CliResult<T>;
}

impl<T> Context<T> for slu_core::Result<T> {
    fn ctx(self, module: &'static str) -> CliResult<T> {
        self.map_err(|source| match source {
            slu_core::Error::Config(m) => CliError::Usage(format!("[{module}] {m}")),
            source => CliError::Data { module, source },
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.global.verbose {
        "info"
    } else {
        "warn"
    }))
    .format_timestamp(None)
    .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("slu: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => EXIT_USAGE,
                CliError::Data { .. } => EXIT_DATA,
            })
        }
    }
}
