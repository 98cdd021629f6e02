use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix cannot be decomposed into translation, rotation and scale: {0}")]
    Decomposition(String),

    #[error("mask contains no feature voxels")]
    NoFeature,

    #[error("point ({x}, {y}, {z}) lies outside the volume bounds")]
    OutOfBounds { x: f64, y: f64, z: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("correspondence mismatch: {0}")]
    Correspondence(String),

    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("refinement diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },

    #[error("degenerate paired test: differences have zero variance")]
    DegenerateTest,

    #[error("insufficient sample: need at least {needed} values, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("case {case}: {source}")]
    Case {
        case: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Strips any per-case annotation and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Case { source, .. } => source.root(),
            other => other,
        }
    }
}
