use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FafError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FafError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("node index {index} out of range for graph with {num_nodes} nodes")]
    IndexOutOfRange { index: usize, num_nodes: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("non-finite value at hop {hop}, reducer {reducer}, node {node}")]
    NonFiniteIntermediate {
        hop: usize,
        reducer: String,
        node: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("value {value} outside [0, 1]")]
    OutOfUnitInterval { value: f64 },

    #[error("invalid Cantor codeword: ternary digit 1 at position {position}")]
    InvalidCodeword { position: usize },

    #[error("basis vectors {i} and {j} are not orthogonal (dot = {dot})")]
    NotOrthogonal { i: usize, j: usize, dot: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),
}

impl FafError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FafError::Io {
            path: path.into(),
            source,
        }
    }
}
