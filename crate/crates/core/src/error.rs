//! Error type shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no usable rows in {path}")]
    EmptyInput { path: PathBuf },

    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("zero-norm embedding rows for tokens: {}", tokens.join(", "))]
    DegenerateRows { tokens: Vec<String> },

    #[error("embedding space is already preprocessed")]
    AlreadyPreprocessed,

    #[error("invalid component count {components} for dimension {dim}")]
    InvalidComponents { components: usize, dim: usize },

    #[error("all documents dropped: no in-vocabulary tokens in the corpus")]
    EmptyCorpus,

    #[error("validation error for {id}: {message}")]
    Validation { id: String, message: String },

    #[error("k={k} out of range for n={n}, dim={dim}")]
    KOutOfRange { k: usize, n: usize, dim: usize },

    #[error("degenerate outcome: {message}")]
    DegenerateOutcome { message: String },

    #[error("zero coefficient vector cannot define a gradient direction")]
    DegenerateGradient,

    #[error("sweep failed: {message}")]
    SweepFailed { message: String },

    #[error("insufficient in-vocabulary norm words for axis {axis}: {found} < {required}")]
    InsufficientNorms {
        axis: String,
        found: usize,
        required: usize,
    },

    #[error("frame/space mismatch: {message}")]
    FrameMismatch { message: String },

    #[error("mean direction is degenerate (norm {norm:.3e} below 1e-9)")]
    DegenerateMean { norm: f64 },

    #[error("gradient is collinear with the direction to remove (|cos| = {cos:.12})")]
    Collinear { cos: f64 },

    #[error("degenerate detrend: {message}")]
    DegenerateDetrend { message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
