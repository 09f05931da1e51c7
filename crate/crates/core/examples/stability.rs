//! Absolute stability of the unrolled Euler and RK4 steps at the cubic oscillator's initial state.

use unrolled_sindy::analyze::{jacobian_eigenvalues, stability_report};
use unrolled_sindy::{Method, System};

fn main() -> unrolled_sindy::Result<()> {
    let state = [-0.488, 1.096];
    for l in jacobian_eigenvalues(System::CubicOscillator, &state)? {
        println!("eigenvalue {:.4} {:+.4}i", l.re, l.im);
    }
    let report = stability_report(
        System::CubicOscillator,
        &state,
        &[Method::Euler, Method::Rk4],
        &[0.1, 0.6],
        &[1, 5, 10, 50],
    )?;
    for method in [Method::Euler, Method::Rk4] {
        for h in [0.1, 0.6] {
            let row: Vec<String> = [1, 5, 10, 50]
                .iter()
                .map(|&k| format!("K={k}:{}", if report.is_stable(method, h, k) == Some(true) { "stable" } else { "unstable" }))
                .collect();
            println!("{method:?} h={h}  {}", row.join("  "));
        }
    }
    report.write_csv(std::io::stdout())
}
