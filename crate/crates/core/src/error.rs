use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter outside the admissible domain: {0}")]
    ParameterDomain(String),
    #[error("normalization failed: {0}")]
    NormalizationFailure(String),
    #[error("invalid grid parameters: {0}")]
    InvalidGrid(String),
    #[error("functions live on different grids or sectors")]
    GridMismatch,
    #[error("insufficient range for fitting: {0}")]
    InsufficientRange(String),
    #[error("non-positive value at sample {0}")]
    NonPositiveValue(usize),
    #[error("expected {expected} eigenvalues inside the ball, found {found} (eta = {eta:e})")]
    CountMismatch { eta: f64, expected: usize, found: usize },
    #[error("root did not converge: {0}")]
    RootNotConverged(String),
    #[error("roots collided: {0}")]
    RootCollision(String),
    #[error("branch {label} jumped at eta = {eta:e}")]
    BranchJump { label: String, eta: f64 },
    #[error("degenerate null space: {0}")]
    DegenerateNullspace(String),
    #[error("eigendecomposition failed: {0}")]
    EigendecompositionFailure(String),
}

impl Error {
    /// True for errors caused by bad physical or numerical parameters, as
    /// opposed to a failed computation.
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::ParameterDomain(_) | Error::InvalidGrid(_) | Error::InsufficientRange(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
