//! A small (h, K) sweep on the cubic oscillator, printed as CSV.

use unrolled_sindy::analyze::{run_sweep, SweepSpec};
use unrolled_sindy::{Method, System};

fn main() -> unrolled_sindy::Result<()> {
    let mut spec = SweepSpec::for_system(System::CubicOscillator);
    spec.h_list = vec![0.02, 0.1, 0.4];
    spec.k_list = vec![1, 5, 20];
    spec.methods = vec![Method::Euler, Method::Rk4];
    let table = run_sweep(&spec, None)?;
    for method in [Method::Euler, Method::Rk4] {
        for &h in &spec.h_list {
            if let Some(best) = table.best_k(method, h, 0.0) {
                eprintln!("{method:?} h={h}: best K={} l1 {:?}", best.k, best.l1_error);
            }
        }
    }
    table.write_csv(std::io::stdout())
}
