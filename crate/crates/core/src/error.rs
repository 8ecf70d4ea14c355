use thiserror::Error;

/// Errors raised by the models, detectors and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// An exhaustive search was asked to cover more users than it allows.
    #[error("capacity error: {what} needs {requested} users, limit is {limit}")]
    Capacity {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    /// A covariance factorization failed (matrix not positive semidefinite).
    #[error("factorization error: {0}")]
    Factorization(String),

    /// A fixed-point solver failed to reach its tolerance.
    #[error("solver error: {what} did not converge after {iterations} iterations (residual {residual:e})")]
    Solver {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A scenario or schedule is internally inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
