use std::path::Path;

use ots_core::Error as CoreError;
use thiserror::Error;

/// Errors surfaced by the command-line tools, mapped to exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, configuration or input values (exit code 2).
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Internal(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 2 for usage and validation errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if is_validation(e) => 2,
            _ => 1,
        }
    }
}

/// Core errors caused by caller-supplied values rather than internal failures.
pub fn is_validation(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::BadWeights(_)
            | CoreError::InvalidParameter(_)
            | CoreError::Config(_)
            | CoreError::InvalidBandwidth(_)
            | CoreError::InvalidGrid(_)
            | CoreError::OutOfBox(..)
            | CoreError::SelfIntersectingPolygon(..)
            | CoreError::DegeneratePolygon(_)
    )
}
