use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible range. `name` is the parameter
    /// as users spell it (`lambda`, `dim`, `x`, ...).
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The request is well-formed but outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configured state, path, or memory budget would be exceeded.
    #[error("resource budget exceeded: {0}")]
    Resource(String),

    /// An iterative method failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
