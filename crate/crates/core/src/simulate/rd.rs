//! Method of lines for the two-component reaction–diffusion system on a
//! periodic grid: five-point Laplacian, classical RK4 in time.

use ndarray::Array3;
use rayon::prelude::*;

use crate::data::SpatialGrid;
use crate::error::{Error, Result};

const DIFFUSION: f64 = 0.1;

fn rhs(u: &[f64], out: &mut [f64], nx: usize, ny: usize, dx: f64, dy: f64) {
    let (cx, cy) = (1.0 / (dx * dx), 1.0 / (dy * dy));
    out.par_chunks_mut(ny * 2).enumerate().for_each(|(i, row)| {
        let (im, ip) = ((i + nx - 1) % nx, (i + 1) % nx);
        for j in 0..ny {
            let (jm, jp) = ((j + ny - 1) % ny, (j + 1) % ny);
            let at = |a: usize, b: usize, v: usize| u[(a * ny + b) * 2 + v];
            let (a, b) = (at(i, j, 0), at(i, j, 1));
            let lap = |v: usize| {
                cx * (at(im, j, v) - 2.0 * at(i, j, v) + at(ip, j, v))
                    + cy * (at(i, jm, v) - 2.0 * at(i, j, v) + at(i, jp, v))
            };
            let (a2, b2) = (a * a, b * b);
            row[j * 2] = DIFFUSION * lap(0) + a - a2 * a + b2 * b + a2 * b - a * b2;
            row[j * 2 + 1] = DIFFUSION * lap(1) + b - a2 * a - b2 * b - a2 * b - a * b2;
        }
    });
}

pub(super) fn simulate(
    u0: &ndarray::Array2<f64>,
    grid: &SpatialGrid,
    fine_dt: f64,
    substeps: usize,
    n: usize,
) -> Result<Array3<f64>> {
    let (nx, ny) = (grid.dims()[0], grid.dims()[1]);
    let (dx, dy) = (grid.spacings()[0], grid.spacings()[1]);
    let m = nx * ny;
    let dt = fine_dt / substeps as f64;
    let mut u: Vec<f64> = u0.iter().copied().collect();
    let mut out = Array3::zeros((n, m, 2));
    out.as_slice_mut().expect("fresh")[..2 * m].copy_from_slice(&u);
    let mut k = vec![vec![0.0; 2 * m]; 4];
    let mut stage = vec![0.0; 2 * m];
    for j in 1..n {
        for _ in 0..substeps {
            rhs(&u, &mut k[0], nx, ny, dx, dy);
            for (c, s) in [(0.5, 1), (0.5, 2), (1.0, 3)] {
                stage.iter_mut().zip(&u).zip(&k[s - 1]).for_each(|((st, &x), &f)| *st = x + c * dt * f);
                rhs(&stage, &mut k[s], nx, ny, dx, dy);
            }
            for i in 0..2 * m {
                u[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
            }
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::SimulationDiverged { time: j as f64 * fine_dt });
        }
        out.as_slice_mut().expect("fresh")[j * 2 * m..(j + 1) * 2 * m].copy_from_slice(&u);
    }
    Ok(out)
}
