use std::path::PathBuf;

use thiserror::Error;
use visrec_core::CoreError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {}: {source}", path.display())]
    MissingFile { path: PathBuf, source: std::io::Error },

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("config key {key} = {value:?}: {reason}")]
    Value { key: String, value: String, reason: String },

    #[error("unknown config keys: {0}")]
    UnknownKeys(String),

    #[error("invalid experiment: {0}")]
    Invalid(String),

    #[error("malformed results file: {0}")]
    Results(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub(crate) fn config(line: usize, reason: impl Into<String>) -> Self {
        HarnessError::Config {
            line,
            reason: reason.into(),
        }
    }

    /// Whether the error comes from user input (config or arguments) rather
    /// than from running the pipeline.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            HarnessError::MissingFile { .. }
                | HarnessError::Config { .. }
                | HarnessError::Value { .. }
                | HarnessError::UnknownKeys(_)
                | HarnessError::Invalid(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
