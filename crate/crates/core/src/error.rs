use thiserror::Error;

use crate::model::CoefficientMatrix;
use crate::unroll::Divergence;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset needs at least two snapshots, found {0}")]
    EmptyDataset(usize),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("invalid spatial grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid library: {0}")]
    InvalidLibrary(String),

    #[error("non-finite state value at flat index {index}")]
    NonFiniteState { index: usize },

    #[error("unsupported finite-difference order {0} (expected 1..=4)")]
    UnsupportedOrder(u32),

    #[error("normal equations are singular")]
    SingularSystem,

    #[error("non-finite values in features or targets")]
    NonFiniteFeatures,

    #[error("unrolled prediction diverged at iteration {iteration}: {divergence}")]
    DivergedDuringUnroll {
        iteration: usize,
        divergence: Divergence,
        last_alpha: Box<CoefficientMatrix>,
    },

    #[error("gradient solver only supports constant/monomial libraries")]
    UnsupportedLibraryForSgd,

    #[error("simulation diverged at t = {time}")]
    SimulationDiverged { time: f64 },

    #[error("library mismatch: {0}")]
    LibraryMismatch(String),

    #[error("Jacobian analysis supports at most two state variables of an ODE, got {0}")]
    UnsupportedDimension(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
