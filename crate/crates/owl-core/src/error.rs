//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors produced by the core algorithms.
///
/// Plan-invariant violations are deliberately *not* errors; they are returned
/// as data by [`crate::dataset::validate_plan`].
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An operation that requires data received none.
    EmptyInput(&'static str),
    /// Two sequences that must have equal length do not.
    LengthMismatch { expected: usize, actual: usize },
    /// A vector's dimension does not match the expected feature dimension.
    DimensionMismatch { expected: usize, actual: usize },
    /// A sample id was referenced but no feature vector exists for it.
    MissingFeature(String),
    /// A label was used where it is not allowed (duplicate, reserved, or
    /// outside the current output space).
    BadLabel(String),
    /// A numeric argument was outside its documented domain.
    BadArgument(String),
    /// Non-finite value encountered where finite input is required.
    NonFinite(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::LengthMismatch { expected, actual } => {
                write!(f, "length mismatch: expected {expected}, got {actual}")
            }
            Error::DimensionMismatch { expected, actual } => {
                write!(f, "dimension mismatch: expected {expected}, got {actual}")
            }
            Error::MissingFeature(id) => write!(f, "no feature vector for sample id {id:?}"),
            Error::BadLabel(label) => write!(f, "bad label: {label}"),
            Error::BadArgument(msg) => write!(f, "bad argument: {msg}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
        }
    }
}

impl core::error::Error for Error {}

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
