use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The polar factor is not unique: the input left the proximal-smoothness tube.
    #[error("matrix is rank deficient (smallest singular value {min_singular:.3e})")]
    RankDeficient { min_singular: f64 },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("point is not on the Stiefel manifold (‖xᵀx − I‖ = {deviation:.3e})")]
    NotOnManifold { deviation: f64 },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("graph is not connected")]
    NotConnected,

    #[error("invalid mixing matrix: {0}")]
    InvalidMixing(String),

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("batch of {batch} exceeds the {available} local samples")]
    BatchTooLarge { batch: usize, available: usize },

    #[error("bad IDX magic number {0:#010x}")]
    BadMagic(u32),

    #[error("file is truncated")]
    TruncatedFile,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid value for `{field}`: {msg}")]
    Validation { field: String, msg: String },

    #[error("rate check needs at least two iteration counts")]
    InsufficientPoints,

    #[error("grid search needs at least one candidate")]
    EmptyGrid,

    #[error("no input files given")]
    NoInputs,

    #[error("iteration {iteration}: {source}")]
    Step {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(field: &str, msg: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            msg: msg.into(),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            e @ Error::Step { .. } => e,
            e => Error::Step {
                iteration,
                source: Box::new(e),
            },
        }
    }

    /// Strips any iteration context and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
