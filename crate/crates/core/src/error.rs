use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every fallible operation in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of the operands do not agree.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Input data is unusable (non-finite entries, empty matrix, ...).
    #[error("input error: {0}")]
    Input(String),

    /// A parameter is out of its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A vector to be appended to an orthonormal basis already lies in its span.
    #[error("rank deficiency: residual norm {residual:e} is below tolerance {tolerance:e}")]
    RankDeficient { residual: f64, tolerance: f64 },

    /// A vector is constant, so its mean-removed direction is undefined.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Malformed binary matrix file.
    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Malformed text input.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error signals a numerical failure rather than bad data or usage.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::RankDeficient { .. } | Error::Degenerate(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
