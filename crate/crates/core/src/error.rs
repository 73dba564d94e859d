use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// One of the pair features has (near) zero norm, so the cosine is undefined.
    #[error("degenerate feature vector (user index {user}, item index {item}): norms {user_norm:e} / {item_norm:e}")]
    DegenerateFeature {
        user: usize,
        item: usize,
        user_norm: f64,
        item_norm: f64,
    },

    #[error("{path}:{line}: {msg}")]
    Ingest {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("singular normal matrix while solving {side} row {row}")]
    Singular { side: &'static str, row: usize },

    #[error("unknown {kind} id {id}")]
    ColdStart { kind: &'static str, id: u64 },

    #[error("learning rate {eta:e}: {source}")]
    AtLearningRate {
        eta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
