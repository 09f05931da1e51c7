//! How the benefit of unrolling fades as Gaussian noise grows.

use unrolled_sindy::analyze::{l1_error, derive_seed};
use unrolled_sindy::discover::discover;
use unrolled_sindy::simulate::{add_noise, simulate, stride_for, subsample};
use unrolled_sindy::{DiscoveryConfig, System, SystemSpec};

fn main() -> unrolled_sindy::Result<()> {
    let spec = SystemSpec::default_for(System::CubicOscillator);
    let fine = simulate(&spec)?;
    let lib = spec.library()?;
    let truth = spec.ground_truth()?;
    let stride = stride_for(0.02, spec.fine_dt)?;
    for (i, sigma) in [0.0, 0.002, 0.005, 0.01, 0.02].into_iter().enumerate() {
        let noisy = add_noise(&fine, sigma, derive_seed(3, 1, i as u64))?;
        let data = subsample(&noisy, stride)?;
        let mut errs = Vec::new();
        for k in [1, 50] {
            let model = discover(&data, &lib, &DiscoveryConfig::for_system(spec.system).with_k(k))?;
            errs.push(l1_error(&model.coefficients, &truth)?);
        }
        println!("sigma={sigma}: l1(K=1) {:.4}  l1(K=50) {:.4}", errs[0], errs[1]);
    }
    Ok(())
}
