use std::path::PathBuf;

use thiserror::Error;

use crate::tensor::TensorError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("state error: {0}")]
    State(String),
    #[error("numerical divergence at step {step}: {message}")]
    Divergence { step: usize, message: String },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 usage/config, 3 data, 4 divergence, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_)
            | Error::Parse { .. }
            | Error::Integrity(_)
            | Error::Infeasible(_)
            | Error::Undefined(_) => 3,
            Error::Tensor(TensorError::Label { .. }) => 3,
            Error::Divergence { .. } => 4,
            Error::Tensor(_) | Error::State(_) | Error::Io { .. } => 1,
        }
    }
}
