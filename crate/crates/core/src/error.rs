use thiserror::Error;

/// Errors raised by lattice construction, assembly, spectral analysis and the solvers.
#[derive(Debug, Error)]
pub enum QcError {
    #[error("invalid chain parameters: {0}")]
    InvalidParams(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation was called outside the sign regime it assumes
    /// (e.g. `phi''(F) > 0`, `phi''(2F) <= 0`, `A_F > 0`).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("pair potential evaluated at non-positive distance r = {0}")]
    NonPositiveDistance(f64),

    #[error("boundary constraint violated at site {site}: expected {expected}, got {got}")]
    BoundaryViolation { site: isize, expected: f64, got: f64 },

    #[error("no sign change of the modulus on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("matrix is numerically singular: {0}")]
    Singular(String),

    /// Eigensolver failure. `matrix_csv` carries a dump of the offending matrix.
    #[error("eigensolver failure: {reason}")]
    Eigensolver { reason: String, matrix_csv: String },

    #[error("block-structured eigenbasis degeneracy violated: {0}")]
    Degeneracy(String),

    #[error("operator is positive definite on the sampled pencil; no singular direction exists")]
    NoSingularDirection,

    #[error("linear algebra backend: {0}")]
    Backend(String),
}

pub type Result<T> = std::result::Result<T, QcError>;
