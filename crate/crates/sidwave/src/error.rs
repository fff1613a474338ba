use std::fmt;

/// Error type shared by the whole library.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A parameter or precondition violation: bad grid sizes, out-of-range
    /// exponents, domains too small for the requested horizon, and so on.
    Config(String),
    /// A feasibility query with no admissible parameter tuple.
    Infeasible(String),
    /// Input data that does not support the requested computation
    /// (non-positive series handed to a log-log fit, traces too coarse
    /// for quadrature, weight factors overflowing on the support).
    Data(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            Error::Data(msg) => write!(f, "data error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
