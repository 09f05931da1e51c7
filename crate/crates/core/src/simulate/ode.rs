//! Classical RK4 for the two-variable ODE systems, written from the equations
//! directly rather than through a term library.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::simulate::System;

fn rhs(system: System, u: [f64; 2]) -> [f64; 2] {
    let [x, y] = u;
    match system {
        System::CubicOscillator => {
            let (x3, y3) = (x * x * x, y * y * y);
            [-0.1 * x3 + 2.0 * y3, -2.0 * x3 - 0.1 * y3]
        }
        System::LinearOscillator => [-0.1 * x + 2.0 * y, -2.0 * x - 0.1 * y],
        System::FitzHughNagumo => [x - y - x * x * x / 3.0 + 0.1, 0.1 * x - 0.1 * y],
        other => unreachable!("{other} is not an ODE system"),
    }
}

fn rk4_step(system: System, u: [f64; 2], dt: f64) -> [f64; 2] {
    let add = |a: [f64; 2], b: [f64; 2], c: f64| [a[0] + c * b[0], a[1] + c * b[1]];
    let k1 = rhs(system, u);
    let k2 = rhs(system, add(u, k1, 0.5 * dt));
    let k3 = rhs(system, add(u, k2, 0.5 * dt));
    let k4 = rhs(system, add(u, k3, dt));
    [
        u[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        u[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

pub(super) fn simulate(system: System, u0: &[f64], fine_dt: f64, substeps: usize, n: usize) -> Result<Array3<f64>> {
    let dt = fine_dt / substeps as f64;
    let mut out = Array3::zeros((n, 1, 2));
    let mut u = [u0[0], u0[1]];
    out[[0, 0, 0]] = u[0];
    out[[0, 0, 1]] = u[1];
    for j in 1..n {
        for _ in 0..substeps {
            u = rk4_step(system, u, dt);
        }
        if !(u[0].is_finite() && u[1].is_finite()) {
            return Err(Error::SimulationDiverged { time: j as f64 * fine_dt });
        }
        out[[j, 0, 0]] = u[0];
        out[[j, 0, 1]] = u[1];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_oscillator_matches_closed_form() {
        // x + i y rotates at -2 rad/s and decays at rate 0.1
        let out = simulate(System::LinearOscillator, &[1.0, 0.0], 0.01, 10, 501).unwrap();
        let t: f64 = 5.0;
        let (x, y) = ((-0.1 * t).exp() * (2.0 * t).cos(), -(-0.1 * t).exp() * (2.0 * t).sin());
        assert!((out[[500, 0, 0]] - x).abs() < 1e-10);
        assert!((out[[500, 0, 1]] - y).abs() < 1e-10);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |sub: usize| {
            let out = simulate(System::LinearOscillator, &[1.0, 0.0], 1.0, sub, 6).unwrap();
            let x = (-0.1f64 * 5.0).exp() * 10f64.cos();
            (out[[5, 0, 0]] - x).abs()
        };
        let r = err(20) / err(40);
        assert!((r.log2() - 4.0).abs() < 0.3, "{r}");
    }
}
