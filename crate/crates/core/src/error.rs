//! Error type shared by all modules of the crate.

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by tensor operations, solvers and experiment drivers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// An iterative solver ran out of its iteration budget.
    #[error("{context}: no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        context: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A transform was evaluated at a real point inside the spectral support.
    #[error("point {x} lies inside the spectral support (right edge {edge})")]
    InsideSupport { x: f64, edge: f64 },

    /// The singular value is not separated from the bulk: the component is
    /// indistinguishable from noise and recovery is impossible.
    #[error("inside bulk — recovery impossible regime (lambda {lambda}, edge {edge})")]
    ImpossibleRegime { lambda: f64, edge: f64 },

    #[error("evaluation point {0} collides with an eigenvalue")]
    PoleCollision(f64),

    #[error("singular Jacobian after {iterations} Newton iterations")]
    SingularJacobian { iterations: usize },

    /// Newton could not decrease the residual along its search direction.
    #[error("solver stagnated (residual {residual:.3e})")]
    Stagnation { residual: f64 },

    /// A component with zero signal strength has no recoverable alignment.
    #[error("degenerate component: {0}")]
    DegenerateComponent(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
