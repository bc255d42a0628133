//! Error type shared by all modules.

use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

/// Failure modes of the inference engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    Domain(String),
    /// An iterative solver exhausted its iteration budget.
    NonConvergence {
        what: &'static str,
        residual: f64,
        iterations: usize,
    },
    /// Structurally invalid model configuration.
    Config(String),
    /// Numerical breakdown (singular matrix beyond floor, non-finite value).
    Numerical(String),
    /// Invalid simulation request (e.g. link overflow).
    Simulation(String),
    /// Failure annotated with the time index (filtering) or horizon (forecasting).
    AtIndex { index: usize, source: Box<Error> },
}

impl Error {
    /// Wraps an error with the time or horizon index at which it occurred.
    pub fn at(self, index: usize) -> Error {
        Error::AtIndex {
            index,
            source: Box::new(self),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::NonConvergence {
                what,
                residual,
                iterations,
            } => write!(
                f,
                "{what} did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical error: {msg}"),
            Error::Simulation(msg) => write!(f, "simulation error: {msg}"),
            Error::AtIndex { index, source } => write!(f, "at index {index}: {source}"),
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::AtIndex { source, .. } => Some(source),
            _ => None,
        }
    }
}
