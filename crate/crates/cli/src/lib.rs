//! Library side of the `stackel` command-line tool: file schemas, reports
//! and the subcommand pipelines.

pub mod app;
pub mod commands;
pub mod report;
pub mod schema;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent input; exit code 2.
    #[error("input error: {0}")]
    Input(String),
    /// EXACT parsing hit a transcendental function.
    #[error("input error: {0}")]
    Transcendental(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}
