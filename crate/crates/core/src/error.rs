use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed wav: {0}")]
    MalformedWav(String),

    #[error("unsupported wav encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("expected mono audio, found {0} channels")]
    MultiChannel(u16),

    #[error("signal of {len} samples is shorter than the required {required}")]
    SignalTooShort { len: usize, required: usize },

    #[error("{0} signal is silent; SNR is undefined")]
    SilentSignal(&'static str),

    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Attaches the offending path to an error.
    pub fn at(self, path: impl Into<PathBuf>) -> Error {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// True when the root cause is an I/O or on-disk format problem.
    pub fn is_io(&self) -> bool {
        match self {
            Error::File { source, .. } => source.is_io(),
            Error::Io(_)
            | Error::MalformedWav(_)
            | Error::UnsupportedEncoding(_)
            | Error::MultiChannel(_)
            | Error::Format(_)
            | Error::Json(_)
            | Error::Csv(_) => true,
            _ => false,
        }
    }
}
