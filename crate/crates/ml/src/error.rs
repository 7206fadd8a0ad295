use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = MlError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MlError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("ROC-AUC needs both classes present, found only class {class}")]
    SingleClass { class: i64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{0}")]
    InvalidData(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] faf_core::FafError),
}

impl MlError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MlError::Io {
            path: path.into(),
            source,
        }
    }
}
