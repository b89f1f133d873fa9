use thiserror::Error;

use crate::svm::OcsvmModel;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input not sorted by start time (record {index} precedes its predecessor)")]
    Unsorted { index: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("undefined measure: {0}")]
    UndefinedMeasure(String),

    /// The SMO loop hit its iteration cap. The best iterate is still usable.
    #[error("one-class SVM solver did not converge after {iterations} pair updates (KKT gap {gap:.3e})")]
    NotConverged {
        iterations: usize,
        gap: f64,
        best: Box<OcsvmModel>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}
