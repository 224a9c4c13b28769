use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix dimension must be at least {min}, got {got}")]
    Dimension { min: usize, got: usize },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("sparse Bernoulli density δ = {delta} at N = {n} is outside (0, 1]")]
    SparseDensity { delta: f64, n: usize },

    #[error("grid of {cells} cells cannot be projected onto {n} coordinates ({n} must divide {cells})")]
    GridMismatch { cells: usize, n: usize },

    #[error("common refinement of {0} cells exceeds the 2^20 limit")]
    RefinementTooLarge(u128),

    #[error("Volterra operator needs a piecewise degree <= 1 input")]
    DegreeTooHigh,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rule has no closed form: {0}")]
    NoClosedForm(String),

    #[error("integer trace exceeds the {max_bits}-bit limit")]
    Overflow { max_bits: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
