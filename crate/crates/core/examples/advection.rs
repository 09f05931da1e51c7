//! Advection u_t = -0.4 u_x: where plain Euler-SINDy starts picking up extra terms.

use unrolled_sindy::analyze::{compare_support, l1_error};
use unrolled_sindy::discover::{discover, pretty_print};
use unrolled_sindy::simulate::{simulate, stride_for, subsample};
use unrolled_sindy::{DiscoveryConfig, Method, System, SystemSpec};

fn main() -> unrolled_sindy::Result<()> {
    let spec = SystemSpec::default_for(System::Advection);
    let fine = simulate(&spec)?;
    let lib = spec.library()?;
    let truth = spec.ground_truth()?;
    for (method, h) in [(Method::Euler, 4e-3), (Method::Euler, 4e-2), (Method::Rk4, 0.15)] {
        let data = subsample(&fine, stride_for(h, spec.fine_dt)?)?;
        for k in [1, 25] {
            let cfg = DiscoveryConfig::for_system(spec.system).with_method(method).with_k(k);
            let model = discover(&data, &lib, &cfg)?;
            let support = compare_support(&model.coefficients, &truth)?;
            println!(
                "{method:?} h={h} K={k}: l1 {:.2e}, extra terms {}  {}",
                l1_error(&model.coefficients, &truth)?,
                support.extra,
                pretty_print(&model).join("; ")
            );
        }
    }
    Ok(())
}
