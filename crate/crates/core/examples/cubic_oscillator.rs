//! Euler-SINDy against its 50-unrolled variant on the cubic damped oscillator.

use unrolled_sindy::analyze::{compare_support, l1_error};
use unrolled_sindy::discover::{discover, pretty_print};
use unrolled_sindy::simulate::{simulate, stride_for, subsample};
use unrolled_sindy::{DiscoveryConfig, System, SystemSpec};

fn main() -> unrolled_sindy::Result<()> {
    let spec = SystemSpec::default_for(System::CubicOscillator);
    let fine = simulate(&spec)?;
    let lib = spec.library()?;
    let truth = spec.ground_truth()?;
    for h in [2e-4, 0.02, 0.1] {
        let data = subsample(&fine, stride_for(h, spec.fine_dt)?)?;
        for k in [1, 50] {
            let cfg = DiscoveryConfig::for_system(spec.system).with_k(k);
            let model = discover(&data, &lib, &cfg)?;
            let support = compare_support(&model.coefficients, &truth)?;
            println!(
                "h={h} K={k}: l1 {:.5}, support {}, {} iterations",
                l1_error(&model.coefficients, &truth)?,
                if support.correct { "correct".to_string() } else { format!("+{} -{}", support.extra, support.missing) },
                model.trace.len()
            );
            for line in pretty_print(&model) {
                println!("    {line}");
            }
        }
    }
    Ok(())
}
