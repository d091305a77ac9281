use std::fmt;

use thiserror::Error;

/// A config problem, located at a line of the source file when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(line: Option<usize>, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {line}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("invalid input: {0}")]
    Invalid(dasqos::Error),
    #[error("numerical failure: {0}")]
    Numerical(dasqos::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl From<dasqos::Error> for CliError {
    fn from(e: dasqos::Error) -> Self {
        use dasqos::Error::*;
        match e {
            Unstable { .. } | NoRoot { .. } | IllConditioned(_) | Divergence { .. } => CliError::Numerical(e),
            InvalidParameter(_) | InvalidMode(_) | ClosedFormUnavailable { .. } | UnsupportedCluster(_) => CliError::Invalid(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
