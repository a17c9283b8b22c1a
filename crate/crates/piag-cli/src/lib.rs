//! Experiment driver around the `piag` solvers: a flat key = value config
//! format, LIBSVM ingestion, reproducible synthetic problems, preset
//! experiment grids, CSV trace emission, and offline re-verification of the
//! per-step descent and residual certificates.

pub mod config;
pub mod libsvm;
pub mod presets;
pub mod runner;
pub mod synth;
pub mod traceio;
pub mod verify;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] piag::Error),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported label set {labels:?}: need {{-1,+1}} or {{0,1}}")]
    UnsupportedLabels { labels: Vec<String> },

    #[error("config error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("verification found {0} violations")]
    VerificationFailed(u64),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        CliError::Parse {
            line,
            msg: msg.into(),
        }
    }
}
