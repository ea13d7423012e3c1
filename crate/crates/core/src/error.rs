use thiserror::Error;

/// Errors produced by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid cost descriptor: {0}")]
    InvalidCost(String),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("newton iteration stalled at step {step}: residual {residual:.3e} at node {node}")]
    NewtonNotConverged { step: usize, node: usize, residual: f64 },

    #[error("projected SOR hit {sweeps} sweeps at step {step}: last change {change:.3e} at node {node}")]
    LcpNotConverged {
        step: usize,
        sweeps: usize,
        node: usize,
        change: f64,
    },

    #[error("both obstacles within contact threshold at step {step}, node {node}")]
    ObstacleTie { step: usize, node: usize },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("consistency check failed: {0}")]
    Inconsistent(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
