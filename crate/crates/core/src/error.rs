use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid WAV data: {0}")]
    Wav(String),

    #[error("unsupported codec: {0}")]
    UnsupportedCodec(String),

    #[error("format mismatch in strict mode: found {channels} channel(s), {sample_rate} Hz, {bits} bit; expected 1 channel, 44100 Hz, 16 bit")]
    StrictFormat { channels: u16, sample_rate: u32, bits: u16 },

    #[error("signal is all zero and cannot be peak-normalized")]
    Silent,

    #[error("signal too short for analysis: {samples} samples, need at least {needed}")]
    TooShort { samples: usize, needed: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("unsupported format version {found}; expected one of {expected:?}")]
    Version { found: u64, expected: Vec<u64> },

    #[error("malformed {what}: {reason}")]
    Malformed { what: &'static str, reason: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("checksum failure: {0}")]
    Checksum(String),

    #[error("zero variance: PCA cannot select components by variance ratio")]
    ZeroVariance,

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("missing annotations: {0}")]
    MissingAnnotations(String),

    #[error("{0}")]
    Undefined(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn malformed(what: &'static str, reason: impl ToString) -> Self {
        Error::Malformed {
            what,
            reason: reason.to_string(),
        }
    }
}
