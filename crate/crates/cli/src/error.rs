use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] didpower_core::Error),
    #[error("cannot read parameter file {path}: {message}")]
    Params { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing output: {0}")]
    Output(String),
    #[error("equivalence check failed: max relative error {max:e} exceeds {tolerance:e}")]
    CheckFailed { max: f64, tolerance: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Params { .. } => 2,
            CliError::Core(didpower_core::Error::UnattainablePower { .. }) => 3,
            CliError::Core(_) => 2,
            CliError::Io { .. } | CliError::Output(_) | CliError::CheckFailed { .. } => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
