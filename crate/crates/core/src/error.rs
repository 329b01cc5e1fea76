use thiserror::Error;

/// Errors raised by the library.
///
/// The variants map onto the CLI exit-code contract: `Structural` and
/// `Contract` are input problems, `Domain`, `Numeric`, `Unsupported` and
/// `Resource` are physics or resource problems.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the region where a quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Shapes, lengths or indices do not fit together.
    #[error("structural error: {0}")]
    Structural(String),
    /// A numerical routine could not produce a trustworthy answer.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The input is well formed but outside what this crate evaluates.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// The request would exceed a resource cap.
    #[error("resource error: {0}")]
    Resource(String),
    /// A caller-side precondition was violated.
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn structural<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Structural(msg.into()))
}
