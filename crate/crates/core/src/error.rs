//! Error type shared by every layer of the crate.

/// Errors surfaced by envelope operations, inner solvers, and drivers.
#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    /// Two points (or a point and an oracle) disagree on dimension.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A parameter is outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The objective oracle produced a non-finite value or subgradient.
    #[error("objective oracle returned a non-finite {what} at a point with norm {at_norm:.6e}")]
    OracleFailure { what: &'static str, at_norm: f64 },

    /// An iterative solver left the representable range.
    #[error("solver diverged: {0}")]
    SolverDiverged(String),

    /// A request would exceed a hard resource bound (e.g. grid size).
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub(crate) fn dim(expected: usize, actual: usize) -> Self {
        CoreError::DimensionMismatch { expected, actual }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidArgument(msg.into())
    }
}
