use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated payload at frame {frame}")]
    TruncatedFrame { frame: usize },

    #[error("truncated stream at byte offset {offset}")]
    Truncated { offset: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    Dimension { expected: (usize, usize), actual: (usize, usize) },

    #[error("qp {qp} out of range [0, {max}]")]
    QpRange { qp: u8, max: u8 },

    #[error("coefficient {value} does not fit in 16 bits")]
    CoefficientOverflow { value: i64 },

    #[error("corrupt coded unit at byte offset {offset}: {reason}")]
    CorruptUnit { offset: usize, reason: String },

    #[error("no I-frame available: supply exactly one of a coded I unit or an injected reference")]
    MissingReference,

    #[error("structure mismatch: {0}")]
    Structure(String),

    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u16),

    #[error("checksum mismatch in GOP {gop}")]
    Checksum { gop: usize },

    #[error("optimization diverged: {0}")]
    Divergence(String),

    #[error("pipeline stage failed: {0}")]
    Pipeline(String),
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
