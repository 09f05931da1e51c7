//! One-step error of the unrolled schemes on u' = u, and the fitted convergence slopes.

use unrolled_sindy::unroll::{probe_slope, truncation_probe};
use unrolled_sindy::Method;

fn main() -> unrolled_sindy::Result<()> {
    let ks = [1, 2, 4, 8, 16, 32];
    for (method, h) in [(Method::Euler, 0.5), (Method::Rk4, 0.4)] {
        let points = truncation_probe(method, h, &ks)?;
        for p in &points {
            println!("{method:?} h={h} K={:>2}: error {:.3e}", p.k, p.error);
        }
        println!("{method:?} slope {:.3}\n", probe_slope(method, &points)?);
    }
    Ok(())
}
