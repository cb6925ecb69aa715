use thiserror::Error;

use crate::lcmle::LogConcaveFit;
use crate::tails::CertificateReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The solver hit its iteration cap or stalled without certifying the
    /// iterate. The last iterate and its certificate residuals are kept.
    #[error("solver did not converge after {iterations} knot updates ({reason})")]
    NotConverged {
        iterations: usize,
        reason: String,
        last: Box<LogConcaveFit>,
        report: CertificateReport,
    },

    #[error("quadrature did not reach relative tolerance {rel_tol:e} (estimate {estimate}, error {error:e})")]
    Quadrature {
        rel_tol: f64,
        estimate: f64,
        error: f64,
    },

    #[error("{failed} of {total} replications failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of a numerical routine, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. } | Error::Quadrature { .. } | Error::TooManyFailures { .. }
        )
    }
}
