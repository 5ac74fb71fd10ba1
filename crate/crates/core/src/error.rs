use alloc::string::String;
use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    Domain(String),
    /// Invalid configuration; the message names the violated inequality.
    Config(String),
    /// A node configuration hit a pole (denominator below the guard).
    Singular { what: &'static str, magnitude: f64 },
    /// A magnitude left the representable range even after rescaling.
    Overflow(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Config(m) => write!(f, "invalid configuration: {m}"),
            Error::Singular { what, magnitude } => write!(
                f,
                "singular configuration: {what} denominator {magnitude:e} below guard; change R or M"
            ),
            Error::Overflow(m) => write!(f, "overflow: {m}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
