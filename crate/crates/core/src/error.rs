use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the range the simulator or calculator accepts.
    #[error("configuration error: {0}")]
    Config(String),

    /// Arguments are individually valid but do not fit together
    /// (length mismatches, qubit-count mismatches, missing angles).
    #[error("contract error: {0}")]
    Contract(String),

    #[error("ingestion error in {}: {reason}", path.display())]
    Ingest { path: PathBuf, reason: IngestError },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Distinct reasons an IDX or dataset file can be rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { found: u32, expected: u32 },
    #[error("file truncated: need {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("not enough examples: {0}")]
    Insufficient(String),
    #[error("malformed record: {0}")]
    Malformed(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
