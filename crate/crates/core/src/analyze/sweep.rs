//! `(h, K, σ)` sweeps: one reference simulation, one noisy copy per σ,
//! one subsample per `h`, and an independent discovery per cell.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analyze::metrics::{compare_support, l1_error};
use crate::analyze::stability::stability_report;
use crate::data::Dataset;
use crate::discover::discover;
use crate::error::{Error, Result};
use crate::model::{CoefficientMatrix, DiscoveryConfig, Method, Solver};
use crate::simulate::{add_noise, simulate, stride_for, subsample, System, SystemSpec};

/// Seed streams for [`derive_seed`].
pub const NOISE_STREAM: u64 = 1;
pub const CELL_STREAM: u64 = 2;

/// SplitMix64 output for counter `stream·2³² + index` under `master`.
///
/// Every random draw in a sweep is seeded this way, so a cell's result does
/// not depend on which thread ran it or on the other cells.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add((stream << 32 | index).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub simulation: SystemSpec,
    pub h_list: Vec<f64>,
    #[serde(rename = "K_list")]
    pub k_list: Vec<usize>,
    pub sigma_list: Vec<f64>,
    pub methods: Vec<Method>,
    /// Template for every cell; `method`, `K` and `seed` are overwritten per cell.
    pub discovery: DiscoveryConfig,
    pub seed: u64,
    /// Record wall-clock time per cell. Off by default so tables are reproducible byte for byte.
    pub record_runtime: bool,
}

impl SweepSpec {
    pub fn for_system(system: System) -> Self {
        Self {
            simulation: SystemSpec::default_for(system),
            h_list: Vec::new(),
            k_list: Vec::new(),
            sigma_list: vec![0.0],
            methods: vec![Method::Euler],
            discovery: DiscoveryConfig::for_system(system),
            seed: 0,
            record_runtime: false,
        }
    }

    pub fn system(&self) -> System {
        self.simulation.system
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_list.is_empty()
            || self.k_list.is_empty()
            || self.sigma_list.is_empty()
            || self.methods.is_empty()
        {
            return Err(Error::InvalidConfig("h, K, sigma and method lists must be non-empty".into()));
        }
        if self.k_list.contains(&0) {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if self.sigma_list.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig("sigma must be finite and non-negative".into()));
        }
        self.simulation.validate()?;
        self.discovery.validate()?;
        let n = self.simulation.n_snapshots()?;
        for &h in &self.h_list {
            let stride = stride_for(h, self.simulation.fine_dt)?;
            if (n - 1) / stride < 1 {
                return Err(Error::InvalidConfig(format!("h = {h} leaves fewer than two snapshots")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    /// The unrolled prediction blew up during discovery.
    Diverged,
    /// Any other discovery error, e.g. a singular unregularized system.
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub system: System,
    pub method: Method,
    pub solver: Solver,
    pub h: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub sigma: f64,
    pub seed: u64,
    pub status: CellStatus,
    /// `None` unless `status` is `Ok`.
    pub l1_error: Option<f64>,
    pub support_correct: bool,
    pub extra_terms: usize,
    pub missing_terms: usize,
    /// Stability class of `(method, h, K)` at the initial state (two-variable ODEs only).
    pub stable: Option<bool>,
    pub final_loss: Option<f64>,
    pub iterations: usize,
    pub runtime_seconds: Option<f64>,
    pub message: Option<String>,
    pub coefficients: Option<CoefficientMatrix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub spec: SweepSpec,
    pub cells: Vec<SweepCell>,
}

pub const CSV_COLUMNS: [&str; 17] = [
    "system",
    "method",
    "solver",
    "h",
    "K",
    "sigma",
    "seed",
    "status",
    "l1_error",
    "support_correct",
    "extra_terms",
    "missing_terms",
    "stable",
    "final_loss",
    "iterations",
    "runtime_seconds",
    "message",
];

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Euler => "euler",
        Method::Rk4 => "rk4",
    }
}

impl SweepTable {
    pub fn cell(&self, method: Method, h: f64, k: usize, sigma: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.method == method && c.h == h && c.k == k && c.sigma == sigma)
    }

    /// Cell with the lowest final training loss among the `Ok` cells at `(method, h, σ)`.
    pub fn best_k(&self, method: Method, h: f64, sigma: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .filter(|c| c.method == method && c.h == h && c.sigma == sigma)
            .filter(|c| c.status == CellStatus::Ok)
            .min_by(|a, b| {
                let (x, y) = (a.final_loss.unwrap_or(f64::INFINITY), b.final_loss.unwrap_or(f64::INFINITY));
                x.total_cmp(&y)
            })
    }

    /// One row per cell; missing numbers are written as `NaN`, missing flags as empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        let num = |x: Option<f64>| x.map_or_else(|| "NaN".to_string(), |v| v.to_string());
        for c in &self.cells {
            let status = match c.status {
                CellStatus::Ok => "ok",
                CellStatus::Diverged => "diverged",
                CellStatus::Failed => "failed",
            };
            let solver = match c.solver {
                Solver::ClosedForm => "closed-form",
                Solver::Sgd => "sgd",
            };
            w.write_record([
                c.system.name().to_string(),
                method_name(c.method).to_string(),
                solver.to_string(),
                c.h.to_string(),
                c.k.to_string(),
                c.sigma.to_string(),
                c.seed.to_string(),
                status.to_string(),
                num(c.l1_error),
                c.support_correct.to_string(),
                c.extra_terms.to_string(),
                c.missing_terms.to_string(),
                c.stable.map(|s| s.to_string()).unwrap_or_default(),
                num(c.final_loss),
                c.iterations.to_string(),
                c.runtime_seconds.map(|s| s.to_string()).unwrap_or_default(),
                c.message.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Job<'a> {
    index: usize,
    sigma: f64,
    h: f64,
    method: Method,
    k: usize,
    data: &'a Dataset,
}

/// Runs every `(σ, method, h, K)` cell, in that nesting order.
///
/// `jobs` caps the worker threads (`None` uses the global pool). Individual
/// cells never fail the sweep; only an invalid spec or a diverging reference
/// simulation does.
pub fn run_sweep(spec: &SweepSpec, jobs: Option<usize>) -> Result<SweepTable> {
    spec.validate()?;
    let system = spec.system();
    let clean = simulate(&spec.simulation)?;
    let library = spec.simulation.library()?;
    let truth = spec.simulation.ground_truth()?;
    let stability = if system.is_ode() {
        let ks: Vec<usize> = spec.k_list.clone();
        Some(stability_report(system, &spec.simulation.initial, &spec.methods, &spec.h_list, &ks)?)
    } else {
        None
    };

    // [σ][h]
    let mut datasets: Vec<Vec<Dataset>> = Vec::new();
    for (si, &sigma) in spec.sigma_list.iter().enumerate() {
        let noisy = add_noise(&clean, sigma, derive_seed(spec.seed, NOISE_STREAM, si as u64))?;
        let per_h = spec
            .h_list
            .iter()
            .map(|&h| subsample(&noisy, stride_for(h, spec.simulation.fine_dt)?))
            .collect::<Result<Vec<_>>>()?;
        datasets.push(per_h);
    }
    drop(clean);

    let mut work = Vec::new();
    for (si, &sigma) in spec.sigma_list.iter().enumerate() {
        for &method in &spec.methods {
            for (hi, &h) in spec.h_list.iter().enumerate() {
                for &k in &spec.k_list {
                    work.push(Job { index: work.len(), sigma, h, method, k, data: &datasets[si][hi] });
                }
            }
        }
    }

    let run_one = |job: &Job<'_>| -> SweepCell {
        let seed = derive_seed(spec.seed, CELL_STREAM, job.index as u64);
        let config = DiscoveryConfig { method: job.method, k: job.k, seed, ..spec.discovery.clone() };
        let start = Instant::now();
        let outcome = discover(job.data, &library, &config);
        let runtime = spec.record_runtime.then(|| start.elapsed().as_secs_f64());
        let mut cell = SweepCell {
            system,
            method: job.method,
            solver: config.solver,
            h: job.h,
            k: job.k,
            sigma: job.sigma,
            seed,
            status: CellStatus::Ok,
            l1_error: None,
            support_correct: false,
            extra_terms: 0,
            missing_terms: 0,
            stable: stability.as_ref().and_then(|r| r.is_stable(job.method, job.h, job.k)),
            final_loss: None,
            iterations: 0,
            runtime_seconds: runtime,
            message: None,
            coefficients: None,
        };
        match outcome.and_then(|m| {
            let l1 = l1_error(&m.coefficients, &truth)?;
            let support = compare_support(&m.coefficients, &truth)?;
            Ok((m, l1, support))
        }) {
            Ok((m, l1, support)) => {
                cell.l1_error = Some(l1);
                cell.support_correct = support.correct;
                cell.extra_terms = support.extra;
                cell.missing_terms = support.missing;
                cell.final_loss = m.trace.last().map(|r| r.loss);
                cell.iterations = m.trace.len();
                cell.coefficients = Some(m.coefficients);
            }
            Err(e) => {
                cell.status = match e {
                    Error::DivergedDuringUnroll { iteration, .. } => {
                        cell.iterations = iteration;
                        CellStatus::Diverged
                    }
                    _ => CellStatus::Failed,
                };
                cell.message = Some(e.to_string());
            }
        }
        cell
    };

    let cells: Vec<SweepCell> = match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            pool.install(|| work.par_iter().map(run_one).collect())
        }
        None => work.par_iter().map(run_one).collect(),
    };
    Ok(SweepTable { spec: spec.clone(), cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cubic() -> SweepSpec {
        let mut spec = SweepSpec::for_system(System::CubicOscillator);
        spec.simulation.t_end = 2.0;
        spec.simulation.fine_dt = 1e-3;
        spec.h_list = vec![0.01, 0.1];
        spec.k_list = vec![1, 10];
        spec
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..100).map(|i| derive_seed(7, CELL_STREAM, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 100);
        assert_ne!(derive_seed(7, NOISE_STREAM, 0), derive_seed(7, CELL_STREAM, 0));
        assert_eq!(derive_seed(7, CELL_STREAM, 3), a[3]);
    }

    #[test]
    fn empty_lists_rejected() {
        let mut spec = small_cubic();
        spec.h_list.clear();
        assert!(matches!(run_sweep(&spec, Some(1)), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn off_grid_h_rejected() {
        let mut spec = small_cubic();
        spec.h_list = vec![0.0015];
        assert!(run_sweep(&spec, None).is_err());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let mut spec = small_cubic();
        spec.sigma_list = vec![0.0, 0.01];
        let a = run_sweep(&spec, Some(1)).unwrap();
        let b = run_sweep(&spec, Some(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 8);
        let mut x = Vec::new();
        let mut y = Vec::new();
        a.write_csv(&mut x).unwrap();
        b.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
        for c in &a.cells {
            if c.status == CellStatus::Ok {
                assert!(c.l1_error.unwrap() >= 0.0);
                assert!(c.stable.is_some());
            }
        }
    }

    #[test]
    fn csv_has_fixed_header_and_one_row_per_cell() {
        let t = run_sweep(&small_cubic(), None).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let mut r = csv::Reader::from_reader(buf.as_slice());
        assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), CSV_COLUMNS.to_vec());
        assert_eq!(r.records().count(), t.cells.len());
        assert!(t.best_k(Method::Euler, 0.01, 0.0).is_some());
    }
}
