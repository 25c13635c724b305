use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand dimensions do not agree.
    Shape(String),
    /// A size parameter is outside the supported range.
    Size(String),
    /// An argument lies outside the mathematical domain of the operation.
    Domain(String),
    /// Invalid configuration value.
    Config(String),
    /// A matrix or vector entry is NaN or infinite.
    NonFinite { index: usize },
    /// Network layers do not chain.
    Structure(String),
    /// FIR design request cannot be met at the given order.
    Design { message: String, min_order: usize },
    /// Training produced a non-finite loss.
    Divergence { epoch: usize },
    /// A linear system could not be solved.
    Singular,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(m) => write!(f, "shape error: {m}"),
            Error::Size(m) => write!(f, "size error: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::NonFinite { index } => write!(f, "non-finite value at flat index {index}"),
            Error::Structure(m) => write!(f, "structure error: {m}"),
            Error::Design { message, min_order } => {
                write!(f, "design error: {message} (minimum order {min_order})")
            }
            Error::Divergence { epoch } => write!(f, "training diverged at epoch {epoch}"),
            Error::Singular => write!(f, "singular matrix"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::error::Error::Shape(alloc::format!($($arg)*)) };
}
pub(crate) use shape_err;
