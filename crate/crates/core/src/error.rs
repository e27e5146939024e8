//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Cholesky pivot was not strictly positive.
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is not symmetric (max relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("non-finite evaluation at probe {0}")]
    NonFiniteEvaluation(String),

    #[error("quadrature did not converge at order {order} (change {change:e})")]
    QuadratureNotConverged { order: usize, change: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("third-order cumulants not symmetric (max deviation {0:e})")]
    SymmetryViolation(f64),

    #[error("{failures} of {replicates} replicates failed to converge")]
    TooManyFailures { failures: usize, replicates: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{0}")]
    Parse(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::NonFiniteEvaluation(_)
                | Error::QuadratureNotConverged { .. }
                | Error::NoConvergence { .. }
                | Error::DegenerateData(_)
                | Error::SymmetryViolation(_)
                | Error::TooManyFailures { .. }
        )
    }
}
