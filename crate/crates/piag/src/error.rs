//! Error type shared by the solver and diagnostics modules.

/// Errors surfaced by problem construction, solver configuration and the
/// diagnostics utilities.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("gradient table has not been warm-started")]
    NotWarmStarted,

    #[error("snapshot aggregation requires a warm-started snapshot")]
    MissingSnapshot,

    #[error("F* is unknown; compute it with a reference run first")]
    UnknownFStar,

    #[error("reference minimum {f_star} lies above an observed objective value {observed}")]
    InconsistentReference { f_star: f64, observed: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
