use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Io,
    Data,
    Internal,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 1,
            ErrorCategory::Io => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::Internal => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Usage => "usage",
            ErrorCategory::Io => "io",
            ErrorCategory::Data => "data",
            ErrorCategory::Internal => "internal",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty code")]
    EmptyCode,
    #[error("malformed code {code:?}: {reason}")]
    MalformedCode { code: String, reason: &'static str },
    #[error("invalid hierarchy level {0} (expected 1..=5)")]
    InvalidLevel(u8),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: header lacks required column {column:?}")]
    MissingColumn { path: PathBuf, column: &'static str },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("matrix has no rows")]
    EmptyMatrix,
    #[error("invalid population: N = {n}, N_A = {n_after}")]
    InvalidPopulation { n: u64, n_after: u64 },
    #[error("too few samples: need at least 2 per side, got {x} and {y}")]
    TooFewSamples { x: usize, y: usize },
    #[error("paired test needs equal lengths, got {x} and {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("degrees of freedom must be positive and finite, got {0}")]
    InvalidDf(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed report: {0}")]
    MalformedReport(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(code: &str, reason: &'static str) -> Self {
        Error::MalformedCode {
            code: code.to_string(),
            reason,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Io,
            Error::Csv { source, .. } if source.is_io_error() => ErrorCategory::Io,
            Error::InvalidConfig(_) => ErrorCategory::Usage,
            Error::ShapeMismatch(_) => ErrorCategory::Internal,
            _ => ErrorCategory::Data,
        }
    }
}
