use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("attribute dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },

    #[error("vertex index {index} out of range for order {order}")]
    IndexOutOfRange { index: usize, order: usize },

    #[error("edge ({i}, {j}) listed more than once")]
    DuplicateEdge { i: usize, j: usize },

    #[error("edge ({0}, {0}) is a self-loop; the diagonal holds vertex attributes")]
    SelfLoop(usize),

    #[error("graph must have at least one vertex")]
    EmptyGraph,

    #[error("cannot pad a graph of order {order} down to {target}")]
    PadTooSmall { order: usize, target: usize },

    #[error("not a permutation: {0:?}")]
    InvalidPermutation(Vec<usize>),

    #[error("exact solver capped at order {cap}, got order {order}")]
    ExactOrderExceeded { order: usize, cap: usize },

    #[error("negative radicand {0:e} in distance; solver returned an inconsistent kernel value")]
    NegativeRadicand(f64),

    #[error("codebook is empty")]
    EmptyCodebook,

    #[error("sample is empty")]
    EmptySample,

    #[error("need at least {needed} samples, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },

    #[error("label must be -1 or +1, got {0}")]
    InvalidLabel(f64),

    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("at iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_iteration(iteration: usize, source: Error) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(source),
        }
    }
}
