use thiserror::Error;

/// Errors raised by sequence arithmetic, model construction and the solvers.
#[derive(Debug, Error)]
pub enum FbdError {
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("empty sequence")]
    Empty,

    #[error("zero-energy input: {0}")]
    ZeroEnergy(&'static str),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inconsistent dimensions: {0}")]
    Dimension(String),

    #[error("adjoint test failed: relative mismatch {mismatch:e}")]
    AdjointMismatch { mismatch: f64 },

    #[error("solver diverged in {stage}: objective rose from {before:e} to {after:e}")]
    Divergence { stage: String, before: f64, after: f64 },

    #[error("linear solve failed: {0}")]
    Singular(String),
}

impl FbdError {
    /// True for errors that originate in an iterative solve rather than in
    /// input validation.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            FbdError::Divergence { .. } | FbdError::Singular(_) | FbdError::AdjointMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, FbdError>;
