use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("node budget exceeded: {needed} nodes requested, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("bisection bracket [{lo}, {hi}] does not straddle the root")]
    Bracket { lo: f64, hi: f64 },

    #[error("calibration grid too coarse: refinement moved the index by {delta:e}")]
    GridTooCoarse { delta: f64 },

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("model error: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
