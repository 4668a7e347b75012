use thiserror::Error;

/// Errors raised by the tuning library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid constructor arguments (bounds, counts, tolerances).
    #[error("configuration error: {0}")]
    Config(String),

    /// A point or buffer does not have the domain's dimensionality.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A user-space value lies outside `[lower, upper]`.
    #[error("value {value} outside domain [{lower}, {upper}]")]
    OutOfDomain { value: f64, lower: f64, upper: f64 },

    /// The session API was driven out of order (e.g. `end` without `start`).
    #[error("usage error: {0}")]
    Usage(String),

    /// An optimizer contract was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Error returned by the fallible execution helpers: either the session
/// rejected the call or the user's target failed.
#[derive(Debug, Error)]
pub enum ExecError<E> {
    #[error(transparent)]
    Tuning(#[from] Error),
    #[error("target failed: {0}")]
    Target(E),
}
