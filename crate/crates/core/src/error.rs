use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rank {rank} exceeds min dimension of a {rows}x{cols} matrix")]
    RankTooLarge {
        rank: usize,
        rows: usize,
        cols: usize,
    },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("SVD failed to converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("slice {slice}: {source}")]
    Slice {
        slice: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("fitness is undefined for an all-zero tensor")]
    ZeroTensor,

    #[error("node {node} has zero total edge weight")]
    IsolatedNode { node: usize },

    #[error("malformed input {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_slice(self, slice: usize) -> Error {
        match self {
            e @ Error::Slice { .. } => e,
            e => Error::Slice {
                slice,
                source: Box::new(e),
            },
        }
    }

    /// Innermost error, skipping slice wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Slice { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the numerical routines themselves, as opposed to
    /// bad input (shapes, ranks, files).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self.root(),
            Error::NoConvergence { .. } | Error::NonFinite { .. } | Error::ZeroTensor
        )
    }
}
