use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Input data or model output failed a check.
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Endpoint(String),
    /// Bad config, missing files, unwritable output.
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation(_) => 1,
            CliError::Endpoint(_) => 2,
            CliError::Config(_) => 3,
        })
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

pub fn validation_err(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}
