use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: malformed JSON: {source}")]
    MalformedFile {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: schema violation: {message}")]
    SchemaViolation { path: PathBuf, message: String },

    #[error("{path}: {kind} {id} references unknown {target} {target_id}")]
    DanglingReference {
        path: PathBuf,
        kind: &'static str,
        id: u64,
        target: &'static str,
        target_id: u64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precision/recall curve undefined: no groundtruth instances")]
    UndefinedCurve,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
