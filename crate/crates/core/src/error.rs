use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A multi-index is identically zero, so the drift never reaches zero at the root.
    #[error("no bifurcation: multi-index {0} has no positive component")]
    NoBifurcation(String),

    /// A symbol fails the sign condition on its declared domain.
    #[error("sign condition violated: {0}")]
    Sign(String),

    /// Least-squares fitting failed.
    #[error("fit error: {0}")]
    Fit(String),

    /// An adaptive rule stopped before reaching its tolerance.
    #[error("quadrature did not converge: estimate {value:e}, error {error:e} after {evals} evaluations")]
    NotConverged { value: f64, error: f64, evals: u64 },

    /// A simulation configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed tabular input.
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
