//! Discovery solvers.

pub mod closed_form;
pub mod pretty;
pub mod ridge;
pub mod sgd;

pub use closed_form::{
    discover_closed_form, discover_closed_form_from, discover_closed_form_history,
    finite_difference_targets, ridge_threshold_step,
};
pub use pretty::{pretty_print, pretty_print_named};
pub use ridge::{cholesky_solve, ridge_solve, NormalSystem};
pub use sgd::{discover_sgd, sgd_loss, sgd_loss_and_gradient, SgdEvaluation};

use crate::data::Dataset;
use crate::dictionary::Library;
use crate::error::Result;
use crate::model::{DiscoveredModel, DiscoveryConfig, Solver};

/// Dispatches on `config.solver`.
pub fn discover(dataset: &Dataset, library: &Library, config: &DiscoveryConfig) -> Result<DiscoveredModel> {
    match config.solver {
        Solver::ClosedForm => discover_closed_form(dataset, library, config),
        Solver::Sgd => discover_sgd(dataset, library, config),
    }
}
