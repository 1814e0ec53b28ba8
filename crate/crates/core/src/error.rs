use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SurvError>;

#[derive(Debug, Error)]
pub enum SurvError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("no events: {0}")]
    NoEvents(String),

    #[error("no comparable pairs for concordance")]
    NoComparablePairs,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("training diverged: {0}")]
    Diverged(String),
}

impl SurvError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        SurvError::Invalid(msg.into())
    }

    pub fn dim(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        SurvError::DimensionMismatch {
            context: context.into(),
            expected,
            actual,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SurvError::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad user input rather than a failure during computation.
    pub fn is_validation(&self) -> bool {
        !matches!(self, SurvError::Diverged(_) | SurvError::NonFinite(_))
    }
}
