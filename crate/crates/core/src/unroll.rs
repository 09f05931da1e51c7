//! K-unrolled explicit integrators.
//!
//! Each observation step `h_j` is split into `K` sub-steps of Euler or RK4.
//! Alongside the prediction the pass accumulates the effective dictionary
//! `Θ̃ = (1/K) Σ_k Θ_k`, chosen so that `prediction = U_prev + h_j Θ̃ α` for
//! every row. Rows are processed snapshot by snapshot in parallel; every row
//! uses the same summation order, so results do not depend on the partitioning.

use std::fmt;

use ndarray::{Array2, Array3, ArrayView3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SpatialGrid;
use crate::dictionary::{Library, TermKind};
use crate::error::{Error, Result};
use crate::model::{CoefficientMatrix, Method};

/// First non-finite value met while unrolling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    /// Sub-step index `k` in `0..K`.
    pub step: usize,
    /// RK4 stage `1..=4` (Euler uses 1) for a dictionary evaluation; 0 for the sub-step update.
    pub stage: usize,
    /// Flat index into the `[J, M, d₂]` prediction tensor.
    pub location: usize,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "non-finite value at sub-step {}, stage {}, state index {}",
            self.step, self.stage, self.location
        )
    }
}

impl Divergence {
    // evaluation order within a sub-step: stages 1..=4, then the update
    fn order_key(&self) -> (usize, usize, usize) {
        let stage = if self.stage == 0 { 5 } else { self.stage };
        (self.step, stage, self.location)
    }
}

#[derive(Clone, Debug)]
pub struct UnrollResult {
    /// `u^(K)` for each pair, `[J, M, d₂]`.
    pub prediction: Array3<f64>,
    /// `Θ̃`, `[J·M, |Θ|]`.
    pub effective_dictionary: Array2<f64>,
    pub diverged: Option<Divergence>,
}

struct Workspace {
    theta: Vec<f64>,
    theta_sum: Vec<f64>,
    stage: Vec<f64>,
    slope: Vec<f64>,
    scratch: Vec<f64>,
}

impl Workspace {
    fn new(m: usize, p: usize, d: usize) -> Self {
        Self {
            theta: vec![0.0; m * p],
            theta_sum: vec![0.0; m * p],
            stage: vec![0.0; m * d],
            slope: vec![0.0; m * d],
            scratch: Vec::new(),
        }
    }
}

/// `out[i, v] = Σ_c theta[i, c] α[c, v]`, summed in column order.
#[inline]
pub(crate) fn apply_alpha(theta: &[f64], alpha: &[f64], p: usize, d: usize, out: &mut [f64]) {
    for (row, o) in theta.chunks_exact(p).zip(out.chunks_exact_mut(d)) {
        for (v, ov) in o.iter_mut().enumerate() {
            let mut s = 0.0;
            for (c, &th) in row.iter().enumerate() {
                s += th * alpha[c * d + v];
            }
            *ov = s;
        }
    }
}

fn first_bad(xs: &[f64]) -> Option<usize> {
    xs.iter().position(|x| !x.is_finite())
}

#[allow(clippy::too_many_arguments)]
fn unroll_snapshot(
    method: Method,
    lib: &Library,
    alpha: &[f64],
    k: usize,
    u0: &[f64],
    t: f64,
    h: f64,
    pred: &mut [f64],
    acc: &mut [f64],
    ws: &mut Workspace,
) -> Option<Divergence> {
    let p = lib.len();
    let d = lib.n_vars();
    let hs = h / k as f64;
    // location is local here, shifted by the caller
    let bad_theta = |theta: &[f64], step, stage| {
        first_bad(theta).map(|i| Divergence { step, stage, location: (i / p) * d })
    };
    pred.copy_from_slice(u0);
    acc.fill(0.0);
    for step in 0..k {
        let ts = t + step as f64 * hs;
        match method {
            Method::Euler => {
                lib.eval_snapshot(pred, ts, &mut ws.theta, &mut ws.scratch);
                if let Some(div) = bad_theta(&ws.theta, step, 1) {
                    return Some(div);
                }
                for (a, &th) in acc.iter_mut().zip(&ws.theta) {
                    *a += th;
                }
                apply_alpha(&ws.theta, alpha, p, d, &mut ws.slope);
            }
            Method::Rk4 => {
                let Workspace { theta, theta_sum, stage, slope, scratch } = ws;
                let offsets = [0.0, 0.5 * hs, 0.5 * hs, hs];
                let weights = [1.0, 2.0, 2.0, 1.0];
                stage.copy_from_slice(pred);
                for s in 0..4 {
                    if s > 0 {
                        for ((st, &u), &f) in stage.iter_mut().zip(pred.iter()).zip(slope.iter()) {
                            *st = u + offsets[s] * f;
                        }
                        if let Some(i) = first_bad(stage) {
                            return Some(Divergence { step, stage: s + 1, location: i });
                        }
                    }
                    lib.eval_snapshot(stage, ts + offsets[s], theta, scratch);
                    if let Some(div) = bad_theta(theta, step, s + 1) {
                        return Some(div);
                    }
                    if s == 0 {
                        theta_sum.copy_from_slice(theta);
                    } else {
                        for (a, &th) in theta_sum.iter_mut().zip(theta.iter()) {
                            *a += weights[s] * th;
                        }
                    }
                    if s < 3 {
                        apply_alpha(theta, alpha, p, d, slope);
                    }
                }
                for th in theta_sum.iter_mut() {
                    *th /= 6.0;
                }
                for (a, &th) in acc.iter_mut().zip(theta_sum.iter()) {
                    *a += th;
                }
                apply_alpha(theta_sum, alpha, p, d, slope);
            }
        }
        for (u, &f) in pred.iter_mut().zip(&ws.slope) {
            *u += hs * f;
        }
        if let Some(i) = first_bad(pred) {
            return Some(Divergence { step, stage: 0, location: i });
        }
    }
    if k > 1 {
        let kf = k as f64;
        for a in acc.iter_mut() {
            *a /= kf;
        }
    }
    None
}

fn check_shapes(
    prev: &ArrayView3<'_, f64>,
    times: &[f64],
    steps: &[f64],
    library: &Library,
    alpha: &CoefficientMatrix,
    k: usize,
) -> Result<()> {
    let (j, m, d) = prev.dim();
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    if times.len() != j || steps.len() != j {
        return Err(Error::ShapeMismatch(format!(
            "{j} pairs but {} times and {} steps",
            times.len(),
            steps.len()
        )));
    }
    if m != library.grid().size() || d != library.n_vars() {
        return Err(Error::ShapeMismatch("state does not fit the library".into()));
    }
    if alpha.n_terms() != library.len() || alpha.n_vars() != d {
        return Err(Error::LibraryMismatch(format!(
            "coefficients are {}x{}, library needs {}x{d}",
            alpha.n_terms(),
            alpha.n_vars(),
            library.len()
        )));
    }
    if steps.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidTimeGrid("steps must be positive".into()));
    }
    if let Some(index) = crate::data::first_non_finite(prev.iter()) {
        return Err(Error::NonFiniteState { index });
    }
    Ok(())
}

/// Unrolls `method` for `K` sub-steps from every snapshot of `prev`.
pub fn unroll(
    method: Method,
    prev: ArrayView3<'_, f64>,
    times: &[f64],
    steps: &[f64],
    library: &Library,
    alpha: &CoefficientMatrix,
    k: usize,
) -> Result<UnrollResult> {
    check_shapes(&prev, times, steps, library, alpha, k)?;
    let (j, m, d) = prev.dim();
    let p = library.len();
    let prev = prev.as_standard_layout();
    let u = prev.as_slice().expect("standard layout");
    let a = alpha.values().as_standard_layout();
    let a = a.as_slice().expect("standard layout");
    let mut prediction = Array3::zeros((j, m, d));
    let mut effective = Array2::zeros((j * m, p));
    let per_snapshot: Vec<Option<Divergence>> = prediction
        .as_slice_mut()
        .expect("fresh array")
        .par_chunks_mut(m * d)
        .zip(effective.as_slice_mut().expect("fresh array").par_chunks_mut(m * p))
        .zip(u.par_chunks(m * d))
        .zip(times.par_iter().zip(steps.par_iter()))
        .map_init(
            || Workspace::new(m, p, d),
            |ws, (((pred, acc), u0), (&t, &h))| {
                unroll_snapshot(method, library, a, k, u0, t, h, pred, acc, ws)
            },
        )
        .collect();
    let diverged = per_snapshot
        .into_iter()
        .enumerate()
        .filter_map(|(jj, div)| {
            div.map(|mut dv| {
                dv.location += jj * m * d;
                dv
            })
        })
        .min_by_key(Divergence::order_key);
    Ok(UnrollResult { prediction, effective_dictionary: effective, diverged })
}

pub fn unrolled_euler(
    prev: ArrayView3<'_, f64>,
    times: &[f64],
    steps: &[f64],
    library: &Library,
    alpha: &CoefficientMatrix,
    k: usize,
) -> Result<UnrollResult> {
    unroll(Method::Euler, prev, times, steps, library, alpha, k)
}

pub fn unrolled_rk4(
    prev: ArrayView3<'_, f64>,
    times: &[f64],
    steps: &[f64],
    library: &Library,
    alpha: &CoefficientMatrix,
    k: usize,
) -> Result<UnrollResult> {
    unroll(Method::Rk4, prev, times, steps, library, alpha, k)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    #[serde(rename = "K")]
    pub k: usize,
    pub h: f64,
    pub error: f64,
}

/// One unrolled step of `u' = u` from `u(0) = 1`, compared with `e^h`.
pub fn truncation_probe(method: Method, h: f64, k_list: &[usize]) -> Result<Vec<ProbePoint>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(format!("probe step must be positive, got {h}")));
    }
    let lib = Library::new(
        vec!["u".into()],
        SpatialGrid::point(),
        vec![TermKind::Monomial { exponents: vec![1] }],
    )?;
    let alpha = CoefficientMatrix::from_values(Array2::from_elem((1, 1), 1.0))?;
    let u0 = Array3::from_elem((1, 1, 1), 1.0);
    k_list
        .iter()
        .map(|&k| {
            let r = unroll(method, u0.view(), &[0.0], &[h], &lib, &alpha, k)?;
            Ok(ProbePoint { k, h, error: (r.prediction[[0, 0, 0]] - h.exp()).abs() })
        })
        .collect()
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Euler: slope of `log error` against `log K`. RK4: against `log(h/K)`.
pub fn probe_slope(method: Method, points: &[ProbePoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidConfig("a slope needs at least two K values".into()));
    }
    let ks: Vec<usize> = points.iter().map(|p| p.k).collect();
    if ks.iter().enumerate().any(|(i, k)| ks[..i].contains(k)) {
        return Err(Error::InvalidConfig("K values must be distinct".into()));
    }
    if points.iter().any(|p| !(p.error > 0.0)) {
        return Err(Error::InvalidConfig("probe error vanished; cannot take logs".into()));
    }
    let x: Vec<f64> = points
        .iter()
        .map(|p| match method {
            Method::Euler => (p.k as f64).ln(),
            Method::Rk4 => (p.h / p.k as f64).ln(),
        })
        .collect();
    let y: Vec<f64> = points.iter().map(|p| p.error.ln()).collect();
    Ok(fit_slope(&x, &y))
}
