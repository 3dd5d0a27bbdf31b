use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset is empty after {k}-core filtering")]
    EmptyAfterFilter { k: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("item id {item} out of range (num_items = {num_items})")]
    ItemOutOfRange { item: usize, num_items: usize },
    #[error("target index {target} invalid for {classes} classes")]
    InvalidTarget { target: usize, classes: usize },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("non-finite value detected in {0}")]
    NonFinite(String),
    #[error("cannot form {k} clusters from {n} points")]
    TooFewPoints { k: usize, n: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status: 1 usage/configuration, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::NonFinite(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
