use thiserror::Error;

use crate::mdp::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range (limit {limit})")]
    Index { index: usize, limit: usize },

    #[error("invalid MDP: {0}")]
    InvalidMdp(#[from] Violation),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("enumerating {count} policies exceeds the limit of {limit}")]
    Capacity { count: u128, limit: u128 },

    #[error("no deterministic policy dominates at state {state}")]
    NoDominatingPolicy { state: usize },

    #[error("optimality property falsified: {0}")]
    Falsified(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("degenerate baseline: non-positive mean return with zero spread")]
    DegenerateBaseline,
}

pub type Result<T> = std::result::Result<T, Error>;
