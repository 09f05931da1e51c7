//! Absolute stability of the (unrolled) explicit integrators for the
//! two-variable oscillators: an integrator with sub-step `h/K` is stable at a
//! state when every `z_j = (h/K) λ_j` of the local Jacobian lies in
//! `{z : |R(z)| ≤ 1}`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dictionary::Library;
use crate::error::{Error, Result};
use crate::model::{CoefficientMatrix, Method};
use crate::simulate::System;

/// Amplification factor of one step on `y' = λy` with `z = hλ`.
pub fn stability_polynomial(method: Method, z: Complex64) -> Complex64 {
    match method {
        Method::Euler => 1.0 + z,
        Method::Rk4 => 1.0 + z * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0))),
    }
}

/// Eigenvalues of the Jacobian of `u ↦ Θ(u) α` at `state`, for libraries made
/// of polynomial terms in at most two variables.
pub fn model_jacobian_eigenvalues(
    library: &Library,
    alpha: &CoefficientMatrix,
    state: &[f64],
) -> Result<Vec<Complex64>> {
    let d = library.n_vars();
    if d > 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    if state.len() != d || alpha.n_terms() != library.len() || alpha.n_vars() != d {
        return Err(Error::ShapeMismatch("state or coefficients do not fit the library".into()));
    }
    let mut jac = [[0.0; 2]; 2];
    for (t, term) in library.terms().iter().enumerate() {
        let Some(exps) = term.kind.exponents(d) else {
            return Err(Error::UnsupportedDimension(d));
        };
        for w in 0..d {
            if exps[w] == 0 {
                continue;
            }
            // ∂/∂u_w of Π u_i^{e_i}
            let mut partial = exps[w] as f64;
            for (i, &e) in exps.iter().enumerate() {
                let e = if i == w { e - 1 } else { e };
                partial *= state[i].powi(e as i32);
            }
            for v in 0..d {
                jac[v][w] += alpha.get(t, v) * partial;
            }
        }
    }
    Ok(if d == 1 {
        vec![Complex64::new(jac[0][0], 0.0)]
    } else {
        let half_tr = 0.5 * (jac[0][0] + jac[1][1]);
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let disc = Complex64::new(half_tr * half_tr - det, 0.0).sqrt();
        vec![half_tr + disc, half_tr - disc]
    })
}

/// Jacobian eigenvalues of a reference system's right-hand side.
pub fn jacobian_eigenvalues(system: System, state: &[f64]) -> Result<Vec<Complex64>> {
    if !system.is_ode() {
        return Err(Error::UnsupportedDimension(system.n_vars()));
    }
    let lib = system.library()?;
    let gt = system.ground_truth(&lib)?;
    model_jacobian_eigenvalues(&lib, &gt, state)
}

/// `|R((h/K) λ_j)|` for one eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityEntry {
    pub method: Method,
    pub h: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub j: usize,
    pub re_z: f64,
    pub im_z: f64,
    pub abs_r: f64,
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub system: System,
    pub state: Vec<f64>,
    /// `(Re λ_j, Im λ_j)`.
    pub eigenvalues: Vec<(f64, f64)>,
    pub entries: Vec<StabilityEntry>,
}

impl StabilityReport {
    /// Stable when every eigenvalue is; `None` if the combination was not evaluated.
    pub fn is_stable(&self, method: Method, h: f64, k: usize) -> Option<bool> {
        let mut hits = self.entries.iter().filter(|e| e.method == method && e.h == h && e.k == k);
        let first = hits.next()?;
        Some(first.stable && hits.all(|e| e.stable))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "h", "K", "j", "re_z", "im_z", "abs_R", "stable"])?;
        for e in &self.entries {
            let method = match e.method {
                Method::Euler => "euler",
                Method::Rk4 => "rk4",
            };
            w.write_record([
                method.to_string(),
                e.h.to_string(),
                e.k.to_string(),
                e.j.to_string(),
                e.re_z.to_string(),
                e.im_z.to_string(),
                e.abs_r.to_string(),
                e.stable.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn stability_report_for(
    system: System,
    state: &[f64],
    eigenvalues: &[Complex64],
    methods: &[Method],
    h_list: &[f64],
    k_list: &[usize],
) -> Result<StabilityReport> {
    if methods.is_empty() || h_list.is_empty() || k_list.is_empty() {
        return Err(Error::InvalidConfig("methods, h and K lists must be non-empty".into()));
    }
    if h_list.iter().any(|&h| !(h > 0.0 && h.is_finite())) || k_list.contains(&0) {
        return Err(Error::InvalidConfig("h must be positive and K at least 1".into()));
    }
    let mut entries = Vec::new();
    for &method in methods {
        for &h in h_list {
            for &k in k_list {
                for (j, &lam) in eigenvalues.iter().enumerate() {
                    let z = lam * (h / k as f64);
                    let abs_r = stability_polynomial(method, z).norm();
                    entries.push(StabilityEntry {
                        method,
                        h,
                        k,
                        j,
                        re_z: z.re,
                        im_z: z.im,
                        abs_r,
                        stable: abs_r <= 1.0,
                    });
                }
            }
        }
    }
    Ok(StabilityReport {
        system,
        state: state.to_vec(),
        eigenvalues: eigenvalues.iter().map(|l| (l.re, l.im)).collect(),
        entries,
    })
}

/// Classifies every `(method, h, K)` at `state`.
pub fn stability_report(
    system: System,
    state: &[f64],
    methods: &[Method],
    h_list: &[f64],
    k_list: &[usize],
) -> Result<StabilityReport> {
    let eig = jacobian_eigenvalues(system, state)?;
    stability_report_for(system, state, &eig, methods, h_list, k_list)
}
