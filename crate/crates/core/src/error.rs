use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// All points coincide, so no median distance exists.
    #[error("degenerate bandwidth: all {0} points are identical")]
    DegenerateBandwidth(usize),

    #[error("linear solve failed (n = {n}, diag range [{min_diag:e}, {max_diag:e}]): {reason}")]
    Numerical {
        n: usize,
        min_diag: f64,
        max_diag: f64,
        reason: String,
    },

    #[error("simulation diverged: {0}")]
    SimulationDiverged(String),

    #[error("all {count} simulations diverged at iteration {iteration}")]
    AllSimulationsDiverged { iteration: usize, count: usize },

    #[error("every candidate run aborted during hyperparameter selection")]
    SelectionFailed,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
