//! Gradient-based discovery through the unrolled prediction.
//!
//! Sensitivities `S = ∂Ũ/∂α` are pushed forward through every sub-step and
//! RK4 stage next to the state, using the analytic derivatives of monomials.
//! Only polynomial libraries are supported: every row is then a single point
//! and its sensitivity matrix stays `d₂ × |Θ|·d₂`.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, SpatialGrid};
use crate::dictionary::Library;
use crate::discover::closed_form::check_library;
use crate::error::{Error, Result};
use crate::model::{
    CoefficientMatrix, DiscoveredModel, DiscoveryConfig, IterationRecord, Method, Optimizer,
};
use crate::unroll::{unroll, Divergence};

/// Batch objective and its gradient with respect to `α`.
#[derive(Clone, Debug)]
pub struct SgdEvaluation {
    /// `mean_r ‖(U_next − Ũ)_r / h_r‖² + (λ / N) ‖α‖²`.
    pub loss: f64,
    pub gradient: Array2<f64>,
    /// Mean squared prediction residual (unscaled), for the trace.
    pub residual: f64,
}

struct Poly {
    exps: Vec<Vec<u32>>,
    d: usize,
}

impl Poly {
    fn new(library: &Library) -> Result<Self> {
        let d = library.n_vars();
        let exps = library
            .terms()
            .iter()
            .map(|t| t.kind.exponents(d).ok_or(Error::UnsupportedLibraryForSgd))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { exps, d })
    }

    fn p(&self) -> usize {
        self.exps.len()
    }

    /// θ(u) and ∂θ_c/∂u_w.
    fn eval(&self, u: &[f64], theta: &mut [f64], dtheta: &mut [f64]) {
        let d = self.d;
        for (c, e) in self.exps.iter().enumerate() {
            theta[c] = crate::dictionary::monomial(u, e);
            for w in 0..d {
                dtheta[c * d + w] = if e[w] == 0 {
                    0.0
                } else {
                    let mut x = e[w] as f64;
                    for (z, (&uz, &ez)) in u.iter().zip(e).enumerate() {
                        let pw = if z == w { ez - 1 } else { ez };
                        for _ in 0..pw {
                            x *= uz;
                        }
                    }
                    x
                };
            }
        }
    }
}

/// Right-hand side `f = θᵀα` and its sensitivity `∂f/∂α` given `S = ∂u/∂α`.
struct Rhs {
    theta: Vec<f64>,
    dtheta: Vec<f64>,
    jac: Vec<f64>,
}

impl Rhs {
    fn new(p: usize, d: usize) -> Self {
        Self { theta: vec![0.0; p], dtheta: vec![0.0; p * d], jac: vec![0.0; d * d] }
    }

    fn apply(&mut self, poly: &Poly, alpha: &[f64], u: &[f64], s: &[f64], f: &mut [f64], df: &mut [f64]) {
        let (p, d) = (poly.p(), poly.d);
        let q = p * d;
        poly.eval(u, &mut self.theta, &mut self.dtheta);
        for v in 0..d {
            let mut acc = 0.0;
            for c in 0..p {
                acc += self.theta[c] * alpha[c * d + v];
            }
            f[v] = acc;
            for w in 0..d {
                let mut j = 0.0;
                for c in 0..p {
                    j += alpha[c * d + v] * self.dtheta[c * d + w];
                }
                self.jac[v * d + w] = j;
            }
        }
        for v in 0..d {
            let row = &mut df[v * q..(v + 1) * q];
            for (idx, x) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for w in 0..d {
                    acc += self.jac[v * d + w] * s[w * q + idx];
                }
                *x = acc;
            }
            for c in 0..p {
                row[c * d + v] += self.theta[c];
            }
        }
    }
}

/// Unrolled prediction of one row with its sensitivity.
#[allow(clippy::too_many_arguments)]
fn forward_row(
    poly: &Poly,
    method: Method,
    alpha: &[f64],
    k: usize,
    u0: &[f64],
    h: f64,
    u: &mut [f64],
    s: &mut [f64],
) -> Option<(usize, usize, usize)> {
    let d = poly.d;
    let q = poly.p() * d;
    let hs = h / k as f64;
    let mut rhs = Rhs::new(poly.p(), d);
    u.copy_from_slice(u0);
    s.fill(0.0);
    let mut f = vec![0.0; d];
    let mut df = vec![0.0; d * q];
    let bad = |x: &[f64]| x.iter().position(|v| !v.is_finite());
    match method {
        Method::Euler => {
            for step in 0..k {
                rhs.apply(poly, alpha, u, s, &mut f, &mut df);
                for v in 0..d {
                    u[v] += hs * f[v];
                }
                for (a, b) in s.iter_mut().zip(&df) {
                    *a += hs * b;
                }
                if let Some(i) = bad(u) {
                    return Some((step, 0, i));
                }
            }
        }
        Method::Rk4 => {
            let mut us = vec![0.0; d];
            let mut ss = vec![0.0; d * q];
            let mut fsum = vec![0.0; d];
            let mut dfsum = vec![0.0; d * q];
            let offsets = [0.0, 0.5 * hs, 0.5 * hs, hs];
            let weights = [1.0, 2.0, 2.0, 1.0];
            for step in 0..k {
                us.copy_from_slice(u);
                ss.copy_from_slice(s);
                for stage in 0..4 {
                    if stage > 0 {
                        for v in 0..d {
                            us[v] = u[v] + offsets[stage] * f[v];
                        }
                        for ((a, &b), &c) in ss.iter_mut().zip(s.iter()).zip(&df) {
                            *a = b + offsets[stage] * c;
                        }
                        if let Some(i) = bad(&us) {
                            return Some((step, stage + 1, i));
                        }
                    }
                    rhs.apply(poly, alpha, &us, &ss, &mut f, &mut df);
                    if stage == 0 {
                        fsum.copy_from_slice(&f);
                        dfsum.copy_from_slice(&df);
                    } else {
                        for (a, &b) in fsum.iter_mut().zip(&f) {
                            *a += weights[stage] * b;
                        }
                        for (a, &b) in dfsum.iter_mut().zip(&df) {
                            *a += weights[stage] * b;
                        }
                    }
                }
                for v in 0..d {
                    u[v] += hs * (fsum[v] / 6.0);
                }
                for (a, &b) in s.iter_mut().zip(&dfsum) {
                    *a += hs * (b / 6.0);
                }
                if let Some(i) = bad(u) {
                    return Some((step, 0, i));
                }
            }
        }
    }
    None
}

fn check_rows(
    prev: &ArrayView2<'_, f64>,
    next: &ArrayView2<'_, f64>,
    steps: &[f64],
    library: &Library,
    alpha: &Array2<f64>,
) -> Result<()> {
    let d = library.n_vars();
    if prev.dim() != next.dim() || prev.ncols() != d || steps.len() != prev.nrows() {
        return Err(Error::ShapeMismatch("rows, targets and steps disagree".into()));
    }
    if alpha.dim() != (library.len(), d) {
        return Err(Error::LibraryMismatch("coefficients do not fit the library".into()));
    }
    Ok(())
}

/// Loss and forward-mode gradient on the rows `prev → next` (each row one point).
#[allow(clippy::too_many_arguments)]
pub fn sgd_loss_and_gradient(
    library: &Library,
    method: Method,
    k: usize,
    prev: ArrayView2<'_, f64>,
    next: ArrayView2<'_, f64>,
    steps: &[f64],
    alpha: &Array2<f64>,
    lambda: f64,
    n_total: usize,
) -> Result<SgdEvaluation> {
    check_rows(&prev, &next, steps, library, alpha)?;
    let poly = Poly::new(library)?;
    let (p, d) = (poly.p(), poly.d);
    let q = p * d;
    let a = alpha.as_standard_layout();
    let a = a.as_slice().expect("standard layout");
    let n = prev.nrows();
    let mut u = vec![0.0; d];
    let mut s = vec![0.0; d * q];
    let mut grad = vec![0.0; q];
    let (mut loss, mut residual) = (0.0, 0.0);
    for r in 0..n {
        let u0: Vec<f64> = prev.row(r).to_vec();
        let h = steps[r];
        if let Some((step, stage, i)) = forward_row(&poly, method, a, k, &u0, h, &mut u, &mut s) {
            return Err(Error::DivergedDuringUnroll {
                iteration: 0,
                divergence: Divergence { step, stage, location: r * d + i },
                last_alpha: Box::new(
                    CoefficientMatrix::from_values(alpha.clone())
                        .unwrap_or_else(|_| CoefficientMatrix::zeros(p, d)),
                ),
            });
        }
        for v in 0..d {
            let e = next[[r, v]] - u[v];
            residual += e * e;
            let es = e / h;
            loss += es * es;
            let c = -2.0 * es / h;
            for (g, &sv) in grad.iter_mut().zip(&s[v * q..(v + 1) * q]) {
                *g += c * sv;
            }
        }
    }
    let nf = n.max(1) as f64;
    let reg = lambda / n_total.max(1) as f64;
    let norm2: f64 = a.iter().map(|x| x * x).sum();
    let gradient = Array2::from_shape_fn((p, d), |(c, v)| {
        grad[c * d + v] / nf + 2.0 * reg * a[c * d + v]
    });
    Ok(SgdEvaluation {
        loss: loss / nf + reg * norm2,
        gradient,
        residual: residual / (nf * d as f64),
    })
}

/// The same objective computed through the generic unroll (no sensitivities).
#[allow(clippy::too_many_arguments)]
pub fn sgd_loss(
    library: &Library,
    method: Method,
    k: usize,
    prev: ArrayView2<'_, f64>,
    next: ArrayView2<'_, f64>,
    steps: &[f64],
    alpha: &Array2<f64>,
    lambda: f64,
    n_total: usize,
) -> Result<f64> {
    check_rows(&prev, &next, steps, library, alpha)?;
    let d = library.n_vars();
    let n = prev.nrows();
    let point = Library::with_terms(
        library.variables().to_vec(),
        SpatialGrid::point(),
        library.terms().to_vec(),
    )?;
    let u0 = prev.to_owned().into_shape_with_order((n, 1, d)).expect("row layout");
    // a dense mask so that any α, zeros included, is representable
    let coeffs = CoefficientMatrix::with_mask(alpha.clone(), Array2::from_elem(alpha.dim(), true))?;
    let times = vec![0.0; n];
    let res = unroll(method, u0.view(), &times, steps, &point, &coeffs, k)?;
    let mut loss = 0.0;
    for r in 0..n {
        for v in 0..d {
            let e = (next[[r, v]] - res.prediction[[r, 0, v]]) / steps[r];
            loss += e * e;
        }
    }
    let norm2: f64 = alpha.iter().map(|x| x * x).sum();
    Ok(loss / n.max(1) as f64 + lambda / n_total.max(1) as f64 * norm2)
}

struct Radam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Radam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, x: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let (b1t, b2t) = (Self::B1.powi(self.t), Self::B2.powi(self.t));
        let rho_inf = 2.0 / (1.0 - Self::B2) - 1.0;
        let rho = rho_inf - 2.0 * self.t as f64 * b2t / (1.0 - b2t);
        let rect = if rho > 5.0 {
            Some(
                ((rho - 4.0) * (rho - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho))
                    .sqrt(),
            )
        } else {
            None
        };
        for i in 0..x.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g[i] * g[i];
            let mhat = self.m[i] / (1.0 - b1t);
            x[i] -= match rect {
                Some(r) => lr * mhat * r * (1.0 - b2t).sqrt() / (self.v[i].sqrt() + Self::EPS),
                None => lr * mhat,
            };
        }
    }
}

pub fn discover_sgd(
    dataset: &Dataset,
    library: &Library,
    config: &DiscoveryConfig,
) -> Result<DiscoveredModel> {
    config.validate()?;
    let sgd = config.sgd.clone().unwrap_or_default();
    let poly = Poly::new(library)?;
    check_library(dataset, library)?;
    let pairs = dataset.training_pairs()?;
    let (j, m, d) = pairs.prev.dim();
    let n = j * m;
    let prev = pairs.prev.clone().into_shape_with_order((n, d)).expect("contiguous");
    let next = pairs.next.clone().into_shape_with_order((n, d)).expect("contiguous");
    let steps: Vec<f64> = (0..n).map(|r| pairs.steps[r / m]).collect();
    let p = poly.p();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, sgd.init_scale).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut alpha = CoefficientMatrix::zeros(p, d);
    for c in 0..p {
        for v in 0..d {
            alpha.set(c, v, normal.sample(&mut rng));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    let mut epoch_no = 0;
    for round in 0..sgd.threshold_rounds {
        let lr = sgd.learning_rate / sgd.lr_decay.powi(round as i32);
        let mut radam = Radam::new(p * d);
        for _ in 0..sgd.epochs_per_threshold {
            epoch_no += 1;
            let start = alpha.clone();
            order.shuffle(&mut rng);
            let (mut residual, mut rows) = (0.0, 0);
            for batch in order.chunks(sgd.batch_size) {
                let bp = prev.select(ndarray::Axis(0), batch);
                let bn = next.select(ndarray::Axis(0), batch);
                let bs: Vec<f64> = batch.iter().map(|&r| steps[r]).collect();
                let ev = sgd_loss_and_gradient(
                    library,
                    config.method,
                    config.k,
                    bp.view(),
                    bn.view(),
                    &bs,
                    alpha.values(),
                    config.lambda,
                    n,
                )
                .map_err(|e| match e {
                    Error::DivergedDuringUnroll { divergence, .. } => {
                        let mut divergence = divergence;
                        let row = batch[divergence.location / d];
                        divergence.location = row * d + divergence.location % d;
                        Error::DivergedDuringUnroll {
                            iteration: epoch_no,
                            divergence,
                            last_alpha: Box::new(alpha.clone()),
                        }
                    }
                    other => other,
                })?;
                residual += ev.residual * batch.len() as f64;
                rows += batch.len();
                let mut g: Vec<f64> = ev.gradient.iter().copied().collect();
                let mut x: Vec<f64> = alpha.values().iter().copied().collect();
                for (i, gi) in g.iter_mut().enumerate() {
                    if !alpha.is_active(i / d, i % d) {
                        *gi = 0.0;
                    }
                }
                match sgd.optimizer {
                    Optimizer::Gd => {
                        for (xi, gi) in x.iter_mut().zip(&g) {
                            *xi -= lr * gi;
                        }
                    }
                    Optimizer::Radam => radam.step(&mut x, &g, lr),
                }
                for (i, xi) in x.into_iter().enumerate() {
                    alpha.set(i / d, i % d, xi);
                }
            }
            trace.push(IterationRecord {
                iter: epoch_no,
                loss: residual / rows.max(1) as f64,
                alpha_change: alpha.frobenius_distance(&start),
                active_count: alpha.active_count(),
                diverged: false,
            });
        }
        alpha.hard_threshold(config.alpha_th);
    }
    if let Some(last) = trace.last_mut() {
        last.active_count = alpha.active_count();
    }
    Ok(DiscoveredModel {
        library: library.clone(),
        coefficients: alpha,
        config: config.clone(),
        trace,
        dataset_fingerprint: dataset.fingerprint(),
    })
}
