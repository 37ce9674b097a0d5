//! Error type shared by the whole crate.

use thiserror::Error;

/// Errors surfaced by kernel assembly, decomposition, sampling and fitting.
///
/// Scalar payloads are reported as `f64` regardless of the working
/// precision so the error type stays non-generic.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Input data contained a NaN or infinity.
    #[error("non-finite value in {what}")]
    NonFiniteInput { what: &'static str },

    /// An argument violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The smallest eigenvalue fell at or below the positive-definiteness
    /// gate. Callers may add jitter to the diagonal and retry.
    #[error("matrix is not positive definite: lambda_min = {lambda_min:.3e} <= tolerance {tolerance:.3e}")]
    NotPositiveDefinite { lambda_min: f64, tolerance: f64 },

    /// Cholesky factorization hit a non-positive pivot.
    #[error("factorization of a {size}x{size} system failed at pivot {pivot}")]
    Factorization { size: usize, pivot: usize },

    /// The projection sampling phase ran out of probability mass.
    #[error("projection sampling degenerated at step {step}: remaining mass {mass:.3e}")]
    DegenerateSampling { step: usize, mass: f64 },

    /// An exhaustive verifier was asked for more subsets than the cap allows.
    #[error("enumeration over n = {n} exceeds the cap of {cap}")]
    EnumerationTooLarge { n: usize, cap: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
