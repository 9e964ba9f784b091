//! Verification suites, configuration and report output behind the `ruij` binary.

pub mod config;
pub mod output;
pub mod suites;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("output error: {0}")]
    Output(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
}

impl CliError {
    /// Process exit code: 2 for usage, configuration and unwritable output, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::UnknownSuite(_) | CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Evaluation(_) => 1,
        }
    }
}
