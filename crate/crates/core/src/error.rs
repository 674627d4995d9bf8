use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bin width must be finite and positive, got {0}")]
    InvalidBinWidth(f64),
    #[error("label range is empty: y_max ({y_max}) must exceed y_min ({y_min})")]
    EmptyRange { y_min: f64, y_max: f64 },
    #[error("label is not finite: {0}")]
    InvalidLabel(f64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("bandwidth must be finite and positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("sample count must be at least 1, got {0}")]
    InvalidSampleCount(usize),
    #[error("frequencies sum to {actual}, expected {expected}")]
    FrequencySumMismatch { expected: usize, actual: f64 },
    #[error("frequency at bin {index} is invalid: {value}")]
    InvalidFrequency { index: usize, value: f64 },
    #[error("sample is empty")]
    EmptySample,
    #[error("input contains a non-finite value at position {0}")]
    InvalidInput(usize),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("weight at position {index} is invalid: {value}")]
    InvalidWeight { index: usize, value: f64 },
    #[error("tape does not match the network it is replayed against")]
    InvalidTape,
    #[error("non-finite gradient encountered{0}")]
    NonFiniteGradient(String),
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("region has no samples")]
    EmptyRegion,
    #[error("histogram has zero total mass")]
    EmptyHistogram,
    #[error("unsupported report format: {0}")]
    UnsupportedFormat(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status for the command-line front end: 2 for invalid
    /// configuration or arguments, 3 for numeric failure, 4 for I/O and
    /// malformed files.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFiniteGradient(_) => 3,
            Error::Io { .. } | Error::Json(_) | Error::Parse { .. } => 4,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn shape(expected: usize, actual: usize) -> Self {
        Error::ShapeMismatch { expected, actual }
    }
}
