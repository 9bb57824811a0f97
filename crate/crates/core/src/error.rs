//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("circulant embedding has a negative eigenvalue {value:.3e} (largest {max:.3e})")]
    NegativeEigenvalue { value: f64, max: f64 },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("problem size {n} exceeds the cap of {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("path left the admissible region at t = {t}: |y| = {norm:.3e}")]
    Overflow { t: f64, norm: f64 },

    #[error("quadrature did not converge: {0}")]
    QuadratureNonconvergence(String),

    #[error("tail tolerance violated: {0}")]
    TailTolerance(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no interior maximum: {0}")]
    BracketFailure(String),

    #[error("dissipativity check failed: {0}")]
    Dissipativity(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
