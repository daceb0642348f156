use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A stage carries data but the rate (or CPU share) serving it is zero.
    #[error("infeasible rate for user {user}: {what}")]
    InfeasibleRate { user: usize, what: &'static str },

    /// The argument of a scalar surrogate log is non-positive, which means the
    /// auxiliary variable is stale for the precoders it is evaluated at.
    #[error("surrogate domain error: log argument {0} is not positive")]
    SurrogateDomain(f64),

    #[error("subproblem assembly failed: {0}")]
    Assembly(String),

    #[error("conic solver failed: {0}")]
    Solver(String),

    #[error("internal error: {0}")]
    Internal(String),
}
