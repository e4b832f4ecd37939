use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("node id {id} out of range (node count {count})")]
    Range { id: usize, count: usize },

    /// A precondition of an operation was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// NaN or infinity produced during a computation.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category, used by the CLI's error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Range { .. } => "range",
            Error::Contract(_) => "contract",
            Error::Numeric(_) => "numeric",
            Error::Resource(_) => "resource",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Serde(_) => "serde",
        }
    }
}
