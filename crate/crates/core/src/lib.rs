//! Sparse identification of governing equations from sampled trajectories,
//! with the integrator step decoupled from the sampling step by unrolling
//! `K` explicit Euler or RK4 sub-steps inside the regression.

pub mod analyze;
pub mod cli;
pub mod data;
pub mod dictionary;
pub mod discover;
pub mod error;
pub mod io;
pub mod model;
pub mod simulate;
pub mod unroll;

pub use data::{Boundary, Dataset, SpatialGrid, TimeGrid, TrainingPairs};
pub use dictionary::{Library, Term, TermKind};
pub use discover::discover;
pub use error::{Error, Result};
pub use model::{
    CoefficientMatrix, DiscoveredModel, DiscoveryConfig, IterationRecord, Method, Optimizer,
    SgdConfig, Solver,
};
pub use simulate::{System, SystemSpec};
pub use unroll::{unroll, Divergence, UnrollResult};
