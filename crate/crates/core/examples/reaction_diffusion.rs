//! Two-component reaction-diffusion on a periodic 64x64 grid.

use unrolled_sindy::analyze::{compare_support, l1_error};
use unrolled_sindy::discover::{discover, pretty_print};
use unrolled_sindy::simulate::{simulate, stride_for, subsample};
use unrolled_sindy::{DiscoveryConfig, System, SystemSpec};

fn main() -> unrolled_sindy::Result<()> {
    let spec = SystemSpec { t_end: 5.0, ..SystemSpec::default_for(System::ReactionDiffusion2d) };
    let fine = simulate(&spec)?;
    let lib = spec.library()?;
    let truth = spec.ground_truth()?;
    let data = subsample(&fine, stride_for(0.1, spec.fine_dt)?)?;
    for k in [1, 8] {
        let model = discover(&data, &lib, &DiscoveryConfig::for_system(spec.system).with_k(k))?;
        let support = compare_support(&model.coefficients, &truth)?;
        println!(
            "h=0.1 K={k}: l1 {:.4}, support correct {}",
            l1_error(&model.coefficients, &truth)?,
            support.correct
        );
        for line in pretty_print(&model) {
            println!("    {line}");
        }
    }
    Ok(())
}
