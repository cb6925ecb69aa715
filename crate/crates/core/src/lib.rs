//! Log-concave maximum-likelihood density estimation on the real line.
//!
//! The estimator `phi_hat` maximizes the sample log-likelihood over concave
//! log-densities. It is piecewise linear between the smallest and largest
//! observation, kinks only at observations, and is `-inf` outside the
//! sample hull. Besides the solver this crate provides:
//!
//! * [`distributions`]: analytic log-concave reference families,
//! * [`tails`]: mean-excess envelopes, the Chernov exponent and the
//!   characterization inequalities used to certify a fit,
//! * [`oracle`]: independent brute-force references and Monte Carlo estimators,
//! * [`sim`]: the Monte Carlo harness behind the `logconcave` binary.

// `!(x > y)` is used on purpose so that NaN arguments are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod lcmle;
pub mod oracle;
pub mod quadrature;
pub mod sim;
pub mod tails;

pub use distributions::ReferenceDensity;
pub use error::{Error, Result};
pub use lcmle::{fit_mle, LogConcaveFit, SolverConfig, SortedSample};
pub use tails::{certify, CertTolerances, CertificateReport};
