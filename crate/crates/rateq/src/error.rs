//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while assembling or solving a problem.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid load path: {0}")]
    InvalidLoad(String),

    #[error("theta must lie in [1/2,1] (got {0})")]
    ThetaOutOfRange(f64),

    #[error(
        "initial state is not stable at t = 0: distance of l(0) - A y0 to the \
         admissible set is {distance:.6e}"
    )]
    UnstableInitialState { distance: f64 },

    #[error("state lies outside the dissipation domain cone")]
    OutsideDomainCone,

    #[error(
        "incremental solve did not converge within {iterations} iterations \
         (last optimality residual {residual:.6e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("subspace chain is not strictly nested: {0}")]
    NotNested(String),

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("need at least {needed} refinement levels, got {got}")]
    TooFewRefinements { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(expected: usize, got: usize) -> Self {
        Error::DimensionMismatch { expected, got }
    }
}

/// Checks that a vector has the expected length.
pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::dims(expected, got))
    }
}
