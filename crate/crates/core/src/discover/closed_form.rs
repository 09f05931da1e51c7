//! Iterative closed-form discovery: unroll under the current coefficients,
//! ridge-solve against the finite-difference targets, hard-threshold, repeat.

use ndarray::{Array2, ArrayView2};

use crate::data::{Dataset, TrainingPairs};
use crate::dictionary::Library;
use crate::discover::ridge::NormalSystem;
use crate::error::{Error, Result};
use crate::model::{CoefficientMatrix, DiscoveredModel, DiscoveryConfig, IterationRecord};
use crate::unroll::unroll;

/// `U̇ = (U_next − U_prev) / h_j`, flattened to `[J·M, d₂]`.
pub fn finite_difference_targets(pairs: &TrainingPairs) -> Array2<f64> {
    let (j, m, d) = pairs.prev.dim();
    let mut out = Array2::zeros((j * m, d));
    for jj in 0..j {
        let h = pairs.steps[jj];
        for i in 0..m {
            for v in 0..d {
                out[[jj * m + i, v]] = (pairs.next[[jj, i, v]] - pairs.prev[[jj, i, v]]) / h;
            }
        }
    }
    out
}

pub(crate) fn check_library(dataset: &Dataset, library: &Library) -> Result<()> {
    if library.grid().size() != dataset.grid().size() || library.n_vars() != dataset.n_vars() {
        return Err(Error::LibraryMismatch(format!(
            "library covers {} points and {} variables, dataset has {} and {}",
            library.grid().size(),
            library.n_vars(),
            dataset.grid().size(),
            dataset.n_vars()
        )));
    }
    Ok(())
}

/// One ridge solve per target variable on its active terms, followed by hard thresholding.
///
/// `cols[r]` is the library index of column `r` of the normal system.
pub fn ridge_threshold_step(
    system: &NormalSystem,
    cols: &[usize],
    current: &CoefficientMatrix,
    config: &DiscoveryConfig,
) -> Result<CoefficientMatrix> {
    let mut next = current.clone();
    for v in 0..current.n_vars() {
        let (rows, terms): (Vec<usize>, Vec<usize>) = cols
            .iter()
            .enumerate()
            .filter(|(_, &c)| current.is_active(c, v))
            .map(|(r, &c)| (r, c))
            .unzip();
        let sol = system.solve(&rows, v, config.lambda, config.normalize_columns)?;
        for (&c, x) in terms.iter().zip(sol) {
            next.set(c, v, x);
        }
    }
    next.hard_threshold(config.alpha_th);
    Ok(next)
}

/// Mean of `(h_j (U̇ − Θ̃ α))²`, i.e. the squared one-step prediction residual.
fn prediction_loss(
    theta: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    alpha: &Array2<f64>,
    steps: &[f64],
    m: usize,
) -> f64 {
    let (n, p) = theta.dim();
    let d = targets.ncols();
    let mut sum = 0.0;
    for r in 0..n {
        let h = steps[r / m];
        for v in 0..d {
            let mut f = 0.0;
            for c in 0..p {
                f += theta[[r, c]] * alpha[[c, v]];
            }
            let e = h * (targets[[r, v]] - f);
            sum += e * e;
        }
    }
    sum / (n * d) as f64
}

fn zero_model_loss(targets: ArrayView2<'_, f64>, steps: &[f64], m: usize) -> f64 {
    let mut sum = 0.0;
    for (r, y) in targets.rows().into_iter().enumerate() {
        let h = steps[r / m];
        sum += y.iter().map(|x| (h * x) * (h * x)).sum::<f64>();
    }
    sum / targets.len() as f64
}

pub fn discover_closed_form(
    dataset: &Dataset,
    library: &Library,
    config: &DiscoveryConfig,
) -> Result<DiscoveredModel> {
    let start = CoefficientMatrix::zeros(library.len(), library.n_vars());
    run(dataset, library, config, start, &mut |_| {})
}

/// Starts the loop from `initial` instead of zero.
pub fn discover_closed_form_from(
    dataset: &Dataset,
    library: &Library,
    config: &DiscoveryConfig,
    initial: &CoefficientMatrix,
) -> Result<DiscoveredModel> {
    if initial.n_terms() != library.len() || initial.n_vars() != library.n_vars() {
        return Err(Error::LibraryMismatch("initial coefficients do not fit the library".into()));
    }
    run(dataset, library, config, initial.clone(), &mut |_| {})
}

/// Also returns the coefficients after every iteration.
pub fn discover_closed_form_history(
    dataset: &Dataset,
    library: &Library,
    config: &DiscoveryConfig,
) -> Result<(DiscoveredModel, Vec<CoefficientMatrix>)> {
    let mut history = Vec::new();
    let start = CoefficientMatrix::zeros(library.len(), library.n_vars());
    let model = run(dataset, library, config, start, &mut |a| history.push(a.clone()))?;
    Ok((model, history))
}

fn run(
    dataset: &Dataset,
    library: &Library,
    config: &DiscoveryConfig,
    mut alpha: CoefficientMatrix,
    observe: &mut dyn FnMut(&CoefficientMatrix),
) -> Result<DiscoveredModel> {
    config.validate()?;
    check_library(dataset, library)?;
    let pairs = dataset.training_pairs()?;
    let targets = finite_difference_targets(&pairs);
    let m = dataset.grid().size();
    let mut trace: Vec<IterationRecord> = Vec::new();
    for iter in 1..=config.max_iters {
        let cols = alpha.active_terms();
        let (next, record) = if cols.is_empty() {
            let loss = zero_model_loss(targets.view(), &pairs.steps, m);
            let record =
                IterationRecord { iter, loss, alpha_change: 0.0, active_count: 0, diverged: false };
            (alpha.clone(), record)
        } else {
            let sub_lib = library.subset(&cols)?;
            let sub_alpha = alpha.select_terms(&cols);
            let res = unroll(
                config.method,
                pairs.prev.view(),
                &pairs.times,
                &pairs.steps,
                &sub_lib,
                &sub_alpha,
                config.k,
            )?;
            if let Some(divergence) = res.diverged {
                return Err(Error::DivergedDuringUnroll {
                    iteration: iter,
                    divergence,
                    last_alpha: Box::new(alpha),
                });
            }
            let system = NormalSystem::assemble(res.effective_dictionary.view(), targets.view())?;
            let all: Vec<usize> = (0..cols.len()).collect();
            let reduced = ridge_threshold_step(&system, &all, &sub_alpha, config)?;
            let loss = prediction_loss(
                res.effective_dictionary.view(),
                targets.view(),
                reduced.values(),
                &pairs.steps,
                m,
            );
            let next = CoefficientMatrix::expand(&reduced, &cols, library.len());
            let record = IterationRecord {
                iter,
                loss,
                alpha_change: next.frobenius_distance(&alpha),
                active_count: next.active_count(),
                diverged: false,
            };
            (next, record)
        };
        trace.push(record);
        observe(&next);
        alpha = next;
        let w = config.convergence_window;
        if trace.len() >= w {
            let mean = trace[trace.len() - w..].iter().map(|r| r.alpha_change).sum::<f64>() / w as f64;
            if mean < config.convergence_tol {
                break;
            }
        }
        if cols.is_empty() {
            break;
        }
    }
    Ok(DiscoveredModel {
        library: library.clone(),
        coefficients: alpha,
        config: config.clone(),
        trace,
        dataset_fingerprint: dataset.fingerprint(),
    })
}
