use thiserror::Error;

/// Errors raised by the exploration toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// A function was evaluated outside of its domain (e.g. a zero occupancy
    /// entry paired with a positive complexity).
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative routine hit its iteration cap.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    /// A linear program had no feasible point.
    #[error("linear program is infeasible")]
    Infeasible,

    /// The simplex method exhausted its pivot budget.
    #[error("linear program hit the iteration limit")]
    IterationLimit,

    /// A solver result failed its own feasibility check.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed text input.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}
