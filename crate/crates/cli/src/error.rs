use std::fmt;

use fsp::FspError;

/// Failure of a command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or usage; exit code 2.
    Config(String),
    /// Failure while running; exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<FspError> for CliError {
    fn from(e: FspError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn config_err(message: impl fmt::Display) -> CliError {
    CliError::Config(message.to_string())
}

pub fn runtime_err(message: impl fmt::Display) -> CliError {
    CliError::Runtime(message.to_string())
}
