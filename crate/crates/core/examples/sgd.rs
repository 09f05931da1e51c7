//! Gradient-descent discovery through the unrolled prediction, next to the closed form.

use unrolled_sindy::analyze::l1_error;
use unrolled_sindy::discover::{discover, pretty_print};
use unrolled_sindy::simulate::{simulate, stride_for, subsample};
use unrolled_sindy::{DiscoveryConfig, SgdConfig, Solver, System, SystemSpec};

fn main() -> unrolled_sindy::Result<()> {
    let spec = SystemSpec::default_for(System::LinearOscillator);
    let fine = simulate(&spec)?;
    let data = subsample(&fine, stride_for(0.01, spec.fine_dt)?)?;
    let lib = spec.library()?;
    let truth = spec.ground_truth()?;
    for solver in [Solver::ClosedForm, Solver::Sgd] {
        for k in [1, 4] {
            let cfg = DiscoveryConfig {
                solver,
                sgd: Some(SgdConfig::default()),
                seed: 7,
                ..DiscoveryConfig::for_system(spec.system).with_k(k)
            };
            let model = discover(&data, &lib, &cfg)?;
            println!(
                "{solver:?} K={k}: l1 {:.4}  {}",
                l1_error(&model.coefficients, &truth)?,
                pretty_print(&model).join("; ")
            );
        }
    }
    Ok(())
}
