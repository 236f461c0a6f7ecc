use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or invalid configuration (lengths, ranges, empty inputs).
    #[error("configuration error: {0}")]
    Config(String),

    /// A target that cannot be met with the data at hand.
    #[error("calibration error: {0}")]
    Calibration(String),

    /// No calibration size within the scan limit satisfies the guarantee.
    #[error(
        "no calibration size up to {scan_limit} satisfies the condition \
         (best margin {best_margin:.3e} at n_cal = {best_n})"
    )]
    Capacity {
        scan_limit: usize,
        best_n: usize,
        best_margin: f64,
    },

    #[error("fitting error: {0}")]
    Fit(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unsupported schema version {found} in {what} (expected {expected})")]
    Version {
        what: String,
        found: u32,
        expected: u32,
    },

    #[error("checksum mismatch in {0}")]
    Checksum(PathBuf),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
