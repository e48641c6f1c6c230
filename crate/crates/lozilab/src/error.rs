//! Crate-wide error and result types.

/// Errors produced by construction, verification, and I/O routines.
///
/// Verification routines distinguish between *invalid input* (the caller
/// broke a precondition), *inconsistency* (the data contradicts an invariant
/// that the surrounding theory guarantees, e.g. two crossings of curves that
/// can only cross once), and *condition violation* (a checked hypothesis
/// simply fails — usually reported through a report struct instead, but
/// raised as an error when later stages cannot proceed without it).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on the arguments was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Numerical data contradicts a structural invariant.
    #[error("inconsistency: {0}")]
    Inconsistency(String),

    /// A checked hypothesis failed and the computation cannot continue.
    #[error("condition violated: {0}")]
    ConditionViolation(String),

    /// An iteration or subdivision budget ran out before convergence.
    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),

    /// Underlying I/O failure.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("serialization failure: {0}")]
    Serde(#[from] serde_json::Error),

    /// Invalid run configuration.
    #[error("configuration error: {0}")]
    Config(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for an [`Error::InvalidInput`] with a formatted message.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Shorthand for an [`Error::Inconsistency`] with a formatted message.
    pub fn inconsistent(msg: impl Into<String>) -> Self {
        Error::Inconsistency(msg.into())
    }
}
