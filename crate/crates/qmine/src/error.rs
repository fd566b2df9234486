use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    IndexOutOfRange { index: usize, num_qubits: usize },
    #[error("qubit {0} used more than once among targets and controls")]
    OverlappingQubits(usize),
    #[error("map is not a bijection on the segment's basis labels")]
    NonBijective,
    #[error("dimension mismatch: {0} vs {1} qubits")]
    DimensionMismatch(usize, usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
