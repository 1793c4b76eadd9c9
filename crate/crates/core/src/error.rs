use thiserror::Error;

/// Errors raised by the discretization, solvers and CLI plumbing.
#[derive(Debug, Error)]
pub enum FpkError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite value: {0}")]
    Numeric(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("non-positive component {value:e} at cell {index}")]
    Nonpositive { index: usize, value: f64 },
    #[error("degenerate principal eigenvalue: {0} and {1} tie in real part")]
    Degenerate(f64, f64),
    #[error("problem size {cells} exceeds dense limit {limit}")]
    Size { cells: usize, limit: usize },
    #[error("singular factorization: zero pivot at row {0}")]
    Singular(usize),
    #[error("empty fit window: {0}")]
    EmptyWindow(String),
    #[error("distances underflow inside the fit window: {0}")]
    Underflow(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FpkError>;
