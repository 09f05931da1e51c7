//! Error metrics, sweep harness and absolute-stability analysis.

pub mod metrics;
pub mod stability;
pub mod sweep;

pub use metrics::{compare_support, l1_error, SupportComparison};
pub use stability::{
    jacobian_eigenvalues, model_jacobian_eigenvalues, stability_polynomial, stability_report,
    StabilityEntry, StabilityReport,
};
pub use sweep::{derive_seed, run_sweep, CellStatus, SweepCell, SweepSpec, SweepTable};
