//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by the library.
///
/// The variants map one-to-one onto the failure classes the command-line
/// front end distinguishes (configuration, resource, precision, contract).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The tuple configuration is malformed or not admissible.
    #[error("configuration error: {0}")]
    Config(String),
    /// A computation would exceed the configured size or memory budget.
    #[error("resource error: {0}")]
    Resource(String),
    /// A requested tolerance cannot be certified with the given parameters.
    #[error("precision error: {0}")]
    Precision(String),
    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// An argument lies outside the analytic domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    /// Arithmetic overflow in fixed-width integer code.
    #[error("overflow: {0}")]
    Overflow(String),
    /// I/O failure while persisting or loading data.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
