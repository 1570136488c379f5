//! Error type shared across the crate.

use thiserror::Error;

/// Errors surfaced by amplifiers, bound computations, and the verifier.
#[derive(Debug, Error)]
pub enum AmpError {
    /// Caller-supplied arguments violate a documented precondition
    /// (dimension mismatch, non-probability vector, odd `n` where an even
    /// split is required, and so on).
    #[error("invalid input: {0}")]
    Validation(String),

    /// The requested operation is mathematically impossible for the given
    /// family and sample size, not merely unimplemented (for example,
    /// amplifying a rank-`d` covariance from fewer than `d` observations).
    #[error("impossible: {0}")]
    Impossibility(String),

    /// The operation is well defined for some families but not this one.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical routine failed to reach its accuracy contract
    /// (non-convergent continued fraction, matrix with substantially
    /// negative eigenvalues passed where a PSD matrix is required, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A statistical guarantee required by the caller is unavailable at the
    /// given sample size (e.g. a plug-in learner below its sample-size floor).
    #[error("guarantee unavailable: {0}")]
    GuaranteeUnavailable(String),

    /// A Monte-Carlo certificate could not be established at the requested
    /// replication budget: the noise swamps the quantity being certified.
    /// This is *not* a refutation — rerunning with more replicates may
    /// produce a conclusive certificate.
    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

pub type Result<T> = std::result::Result<T, AmpError>;

impl AmpError {
    pub fn validation(msg: impl Into<String>) -> Self {
        AmpError::Validation(msg.into())
    }

    pub fn impossibility(msg: impl Into<String>) -> Self {
        AmpError::Impossibility(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        AmpError::Unsupported(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        AmpError::Numerical(msg.into())
    }

    pub fn guarantee_unavailable(msg: impl Into<String>) -> Self {
        AmpError::GuaranteeUnavailable(msg.into())
    }

    pub fn inconclusive(msg: impl Into<String>) -> Self {
        AmpError::Inconclusive(msg.into())
    }
}
