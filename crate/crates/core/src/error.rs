use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degree {degree} exceeds basis cutoff {cutoff}")]
    DegreeAboveCutoff { degree: usize, cutoff: usize },

    #[error("tensor basis for {ncoord} coordinates at cutoff {cutoff} has {dim} elements, above the configured limit {limit}")]
    BasisTooLarge {
        ncoord: usize,
        cutoff: usize,
        dim: usize,
        limit: usize,
    },

    #[error("bases are inconsistent: {0}")]
    BasisMismatch(String),

    #[error("series did not reach tolerance {tol:.3e} within {terms} terms (residual bound {residual:.3e})")]
    SeriesNotConverged {
        tol: f64,
        terms: usize,
        residual: f64,
    },

    #[error("certification failed: {0}")]
    CertificationFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
