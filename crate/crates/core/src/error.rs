use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced anywhere in the pipeline.
///
/// The CLI maps these onto process exit codes with [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("node {node:?} (index {index}) has zero degree; its transition row is undefined (drop isolated nodes first)")]
    ZeroDegree { node: String, index: usize },

    #[error("column {column} of the {step}-step transition matrix sums to zero")]
    ZeroColumnSum { column: usize, step: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("resource guard: {0}")]
    Resource(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 usage, 3 data, 4 resource guard.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) => 2,
            Error::Resource(_) => 4,
            _ => 3,
        }
    }
}
