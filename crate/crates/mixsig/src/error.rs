//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the documented domain (bad coordinate, wrong length, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A maintained assumption or diagnostic (rank, strategy conditions) failed.
    #[error("diagnostic failure: {0}")]
    Diagnostic(String),

    /// Quadrature, root finding, ODE or extrapolation did not reach its target.
    #[error("numerical failure: {message}")]
    Numerical {
        message: String,
        /// Best available error estimate, when one exists.
        achieved: Option<f64>,
    },

    /// A quantity the field implementation cannot provide.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>, achieved: Option<f64>) -> Self {
        Error::Numerical {
            message: msg.into(),
            achieved,
        }
    }

    pub fn diagnostic(msg: impl Into<String>) -> Self {
        Error::Diagnostic(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
