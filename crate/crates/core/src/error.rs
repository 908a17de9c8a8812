use thiserror::Error;

/// Failure modes shared by every numerical pipeline in the crate.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("point ({0}, {1}, {2}) lies outside the metric domain")]
    Domain(f64, f64, f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate surface: {0}")]
    Degenerate(String),
    #[error("incompatible data, defect {defect:.3e}")]
    Incompatible { defect: f64 },
    #[error("no convergence after {iterations} iterations, last residual {residual:.3e}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid(msg: impl Into<String>) -> LabError {
    LabError::InvalidInput(msg.into())
}
