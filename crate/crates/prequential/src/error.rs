//! Error type shared across the crate.

/// Convenience alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors reported by series loading, forecast evaluation and the
/// simulation lab.
///
/// The variants are deliberately coarse: callers usually only need to
/// distinguish "the input file is broken" from "the parameters are out of
/// domain" from "the data is too short for the requested statistic".
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A row of an input file could not be parsed. `line` is 1-based and
    /// counts the header.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Input data violated a documented requirement (non-positive price,
    /// duplicate date, flag not in {{0,1}}, ...).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A parameter was outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The input was too short for the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A tail-mean was requested for a tail too heavy to have one.
    #[error("infinite tail mean: kappa = {kappa} must exceed 1")]
    InfiniteMean { kappa: f64 },

    /// Two traces that must share a realized series do not.
    #[error("misaligned traces: {0}")]
    Misaligned(String),

    /// A model callback returned an out-of-range value (e.g. a conditional
    /// CDF outside [0, 1]).
    #[error("model error: {0}")]
    Model(String),

    /// A predictor produced different output on two identical runs; it is
    /// stochastic without a fixed seed and cannot be diagnosed.
    #[error("predictor is not reproducible: {0}")]
    NotReproducible(String),

    /// The requested operation is not defined for this model or trace kind.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Underlying I/O failure while reading or writing an artifact.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid_param(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }

    pub(crate) fn insufficient(message: impl Into<String>) -> Self {
        Error::InsufficientData(message.into())
    }
}
