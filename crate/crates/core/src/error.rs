use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library. The variants map onto the CLI exit codes:
/// usage errors exit 1, data errors 2, invariant violations 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("{path}: load error at byte {offset}: {reason}")]
    Load {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("graph error at vertex {vertex}: {reason}")]
    Graph { vertex: u64, reason: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Load { .. } | Error::Graph { .. } | Error::Io { .. } => 2,
            Error::Invariant(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
