use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("preference row {row} sums to {sum}, expected 1")]
    RowNotStochastic { row: usize, sum: f64 },

    #[error("beta must lie in [0, 1], got {0}")]
    BetaOutOfRange(f64),

    #[error("capacity {capacity} outside [0, {num_items}]")]
    CapacityOutOfRange { capacity: f64, num_items: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid placement: {0}")]
    InvalidPlacement(String),

    #[error("demand support has {size} outcomes, limit is {limit}")]
    SupportTooLarge { size: u128, limit: usize },

    #[error("simplex exceeded {0} pivots")]
    NumericalFailure(usize),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error(
        "buffer {capacity} times {chunks} chunks is not an integer chunk budget (user {user})"
    )]
    NonIntegralChunkBudget {
        user: usize,
        capacity: f64,
        chunks: usize,
    },

    #[error("user {user} could not decode {missing} requested chunks")]
    DecodingFailure { user: usize, missing: usize },

    #[error("problem too large for brute force: {0}")]
    TooLarge(String),

    #[error("placement not aligned to a 1/{0} grid")]
    MisalignedPlacement(usize),
}
