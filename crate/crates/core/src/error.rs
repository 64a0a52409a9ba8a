use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the discretization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed mesh: {0}")]
    MalformedMesh(String),

    #[error("mesh generation failed: {0}")]
    Generation(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("element {cell}: {msg}")]
    ElementGeometry { cell: usize, msg: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite entry in local matrix of {0}")]
    NonFinite(String),

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown {kind} `{name}` (known: {known})")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
