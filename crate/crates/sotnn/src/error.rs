use std::path::PathBuf;

use thiserror::Error;

/// Process exit statuses. Usage errors from argument parsing exit with 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Config = 3,
    Data = 4,
    Runtime = 5,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("data: {path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::Config,
            CliError::Data { .. } => ExitCode::Data,
            CliError::Runtime(_) => ExitCode::Runtime,
        }
    }

    pub fn data(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Data {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl From<sotnn_core::Error> for CliError {
    fn from(e: sotnn_core::Error) -> Self {
        match e {
            sotnn_core::Error::Config(_) | sotnn_core::Error::InvalidParameter { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io: {e}"))
    }
}
