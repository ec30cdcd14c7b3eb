use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("subnet {subnet}: latency not increasing with batch size ({smaller_batch} -> {larger_batch})")]
    NonMonotonicLatency {
        subnet: String,
        smaller_batch: u32,
        larger_batch: u32,
    },

    #[error("invalid catalog: {0}")]
    Catalog(String),

    #[error("invalid trace spec: {0}")]
    TraceSpec(String),

    #[error("duplicate query id {0}")]
    DuplicateQuery(u64),

    #[error("queue is empty")]
    EmptyQueue,

    #[error("unknown subnet {0}")]
    UnknownSubnet(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("oracle instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
