//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CurError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurError {
    /// Input data violates a structural requirement (non-finite entries, bad shape).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A scalar or size parameter is out of its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The generator has `sigma_rho == 0` so its rho-truncation has no pseudo-inverse of rank rho.
    #[error("rank-deficient generator: sigma_{rho} = {sigma:e}")]
    RankDeficientGenerator { rho: usize, sigma: f64 },

    /// Exhaustive search would exceed the configured candidate budget.
    #[error("exhaustive search needs {required} candidates, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    /// Maxvol kept hitting an exactly singular candidate after all restarts.
    #[error("singular candidate submatrix after {restarts} restarts")]
    SingularCandidate { restarts: usize },

    /// Orthogonalization of a combined multiplier lost rank.
    #[error("rank collapse while orthogonalizing: rank {rank} < {expected}")]
    RankCollapse { rank: usize, expected: usize },

    /// A closed-form estimate is undefined for these parameters.
    #[error("estimate unavailable: {0}")]
    EstimateUnavailable(String),

    /// SVD iteration failed to converge.
    #[error("SVD did not converge")]
    SvdNoConvergence,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CurError {
    fn from(e: std::io::Error) -> Self {
        CurError::Io(e.to_string())
    }
}
