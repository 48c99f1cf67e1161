use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("bandwidth {0} out of range 1..=128")]
    BandwidthOutOfRange(usize),

    #[error("bandwidth mismatch: expected {expected}, found {found}")]
    BandwidthMismatch { expected: usize, found: usize },

    #[error("channel mismatch: expected {expected}, found {found}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("invalid model config: {0}")]
    Config(String),

    #[error("bad magic at byte {offset}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { offset: u64, expected: u32, found: u32 },

    #[error("truncated input at byte {offset}: needed {needed} more bytes")]
    Truncated { offset: u64, needed: u64 },

    #[error("count mismatch at byte 4: {images} images but {labels} labels")]
    CountMismatch { images: u32, labels: u32 },

    #[error("malformed container at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("unknown operation `{0}`")]
    UnknownOp(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem or malformed files rather
    /// than by invalid arguments.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::File { .. }
                | Error::BadMagic { .. }
                | Error::Truncated { .. }
                | Error::CountMismatch { .. }
                | Error::Format { .. }
        )
    }
}
