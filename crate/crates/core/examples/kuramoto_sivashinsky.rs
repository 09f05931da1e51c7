//! Kuramoto-Sivashinsky at h=0.02: the K=1 fit is biased toward zero, K=10 is not.
//! Takes a few seconds in release mode.

use unrolled_sindy::discover::{discover, pretty_print};
use unrolled_sindy::simulate::{simulate, stride_for, subsample};
use unrolled_sindy::{DiscoveryConfig, System, SystemSpec};

fn main() -> unrolled_sindy::Result<()> {
    let spec = SystemSpec::default_for(System::KuramotoSivashinsky);
    let fine = simulate(&spec)?;
    let data = subsample(&fine, stride_for(0.02, spec.fine_dt)?)?;
    let lib = spec.library()?;
    for k in [1, 10] {
        let model = discover(&data, &lib, &DiscoveryConfig::for_system(spec.system).with_k(k))?;
        println!("K={k}: {}", pretty_print(&model).join("; "));
    }
    Ok(())
}
