use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid hyperparameters, loss keys or experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Malformed input file. `location` is a byte offset (IDX) or line number (CSV).
    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: PathBuf,
        location: ParseLocation,
        message: String,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("target {target} is outside the achievable range [{low}, {high}] of the bias bracket")]
    Bracket { target: f64, low: f64, high: f64 },

    #[error(
        "Monte-Carlo standard error {standard_error:.3e} exceeds tolerance {tolerance:.3e}; \
         increase n_samples"
    )]
    Precision { standard_error: f64, tolerance: f64 },

    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss")]
    Divergence { epoch: usize, batch: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseLocation {
    Byte(u64),
    Line(u64),
}

impl std::fmt::Display for ParseLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseLocation::Byte(b) => write!(f, "byte offset {b}"),
            ParseLocation::Line(l) => write!(f, "line {l}"),
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
