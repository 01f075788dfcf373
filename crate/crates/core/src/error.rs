use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SrcekError>;

#[derive(Debug, Error)]
pub enum SrcekError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("factor count {requested} out of range: {reason}")]
    FactorCount { requested: usize, reason: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("predictor weight {index} is zero; the weighted Jacobian requires nonzero weights")]
    ZeroWeight { index: usize },

    #[error("invalid cross-validation plan: {0}")]
    InvalidPlan(String),

    #[error("fold {fold}: calibration group of {size} objects cannot support {factors} factors")]
    FoldTooSmall {
        fold: usize,
        size: usize,
        factors: usize,
    },

    #[error("cross-validation error is zero (perfect fit); gradient unavailable")]
    PerfectFit,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line search direction is not a descent direction (slope {0:e})")]
    NotDescent(f64),

    #[error("line search failed to find an acceptable step")]
    LineSearchFailure,

    /// `row` is the 1-based data row of a table, or the line of a JSON file.
    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SrcekError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SrcekError::Io {
            path: path.into(),
            source,
        }
    }
}
