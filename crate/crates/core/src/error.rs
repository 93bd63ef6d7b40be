use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {context}: {message}")]
    Format { context: String, message: String },

    #[error("no valid rows in {0}")]
    EmptySeries(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("solver did not converge after {iterations} iterations (last residual rms {residual_rms:.3e})")]
    NonConvergence { iterations: usize, residual_rms: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag, used in the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::EmptySeries(_) => "empty_series",
            Error::Parameter(_) => "parameter",
            Error::NonConvergence { .. } => "non_convergence",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Config(_) => "config",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
