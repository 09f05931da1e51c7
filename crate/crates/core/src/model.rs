//! Coefficients, discovery configuration and the discovered-model artifact.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dictionary::Library;
use crate::error::{Error, Result};
use crate::simulate::System;

/// `|Θ| × d₂` coefficients with an active-term mask.
///
/// Every mutation keeps `values[i][j] == 0` wherever `active[i][j]` is false.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoefficients", into = "RawCoefficients")]
pub struct CoefficientMatrix {
    values: Array2<f64>,
    active: Array2<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoefficients {
    values: Vec<Vec<f64>>,
    active: Vec<Vec<bool>>,
}

impl TryFrom<RawCoefficients> for CoefficientMatrix {
    type Error = Error;
    fn try_from(r: RawCoefficients) -> Result<Self> {
        let rows = r.values.len();
        let cols = r.values.first().map_or(0, Vec::len);
        if r.active.len() != rows
            || r.values.iter().any(|row| row.len() != cols)
            || r.active.iter().any(|row| row.len() != cols)
        {
            return Err(Error::ShapeMismatch("ragged coefficient matrix".into()));
        }
        let values = Array2::from_shape_fn((rows, cols), |(i, j)| r.values[i][j]);
        let active = Array2::from_shape_fn((rows, cols), |(i, j)| r.active[i][j]);
        Self::with_mask(values, active)
    }
}

impl From<CoefficientMatrix> for RawCoefficients {
    fn from(c: CoefficientMatrix) -> Self {
        RawCoefficients {
            values: c.values.outer_iter().map(|r| r.to_vec()).collect(),
            active: c.active.outer_iter().map(|r| r.to_vec()).collect(),
        }
    }
}

impl CoefficientMatrix {
    /// All-zero coefficients with every term active (the starting point of discovery).
    pub fn zeros(n_terms: usize, n_vars: usize) -> Self {
        Self {
            values: Array2::zeros((n_terms, n_vars)),
            active: Array2::from_elem((n_terms, n_vars), true),
        }
    }

    /// Mask derived from the non-zero pattern.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let active = values.mapv(|x| x != 0.0);
        Self::with_mask(values, active)
    }

    pub fn with_mask(values: Array2<f64>, active: Array2<bool>) -> Result<Self> {
        if values.dim() != active.dim() {
            return Err(Error::ShapeMismatch("values and mask differ in shape".into()));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteFeatures);
        }
        if values.iter().zip(active.iter()).any(|(&x, &a)| !a && x != 0.0) {
            return Err(Error::InvalidConfig("non-zero coefficient on an inactive term".into()));
        }
        Ok(Self { values, active })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn active(&self) -> &Array2<bool> {
        &self.active
    }

    pub fn n_terms(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    pub fn get(&self, term: usize, var: usize) -> f64 {
        self.values[[term, var]]
    }

    pub fn is_active(&self, term: usize, var: usize) -> bool {
        self.active[[term, var]]
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Terms active for at least one variable.
    pub fn active_terms(&self) -> Vec<usize> {
        (0..self.n_terms())
            .filter(|&i| self.active.row(i).iter().any(|&a| a))
            .collect()
    }

    /// Writes an active entry; writing to an inactive one is ignored.
    pub fn set(&mut self, term: usize, var: usize, value: f64) {
        if self.active[[term, var]] {
            self.values[[term, var]] = value;
        }
    }

    pub fn deactivate(&mut self, term: usize, var: usize) {
        self.active[[term, var]] = false;
        self.values[[term, var]] = 0.0;
    }

    /// Zeroes and deactivates every entry with `|α| < threshold`.
    pub fn hard_threshold(&mut self, threshold: f64) {
        for (v, a) in self.values.iter_mut().zip(self.active.iter_mut()) {
            if v.abs() < threshold {
                *v = 0.0;
                *a = false;
            }
        }
    }

    /// Rows restricted to `terms`, in the given order.
    pub fn select_terms(&self, terms: &[usize]) -> Self {
        Self {
            values: self.values.select(ndarray::Axis(0), terms),
            active: self.active.select(ndarray::Axis(0), terms),
        }
    }

    /// Scatters a reduced matrix back into full-library rows; other rows become inactive.
    pub fn expand(reduced: &Self, terms: &[usize], n_terms: usize) -> Self {
        let d = reduced.n_vars();
        let mut out = Self {
            values: Array2::zeros((n_terms, d)),
            active: Array2::from_elem((n_terms, d), false),
        };
        for (r, &i) in terms.iter().enumerate() {
            out.values.row_mut(i).assign(&reduced.values.row(r));
            out.active.row_mut(i).assign(&reduced.active.row(r));
        }
        out
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Euler,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    ClosedForm,
    Sgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    /// Plain gradient descent.
    Gd,
    /// Rectified Adam, restarted at every threshold round.
    Radam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub epochs_per_threshold: usize,
    pub threshold_rounds: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    /// Standard deviation of the random initial coefficients.
    pub init_scale: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-3,
            lr_decay: 10.0,
            epochs_per_threshold: 200,
            threshold_rounds: 3,
            batch_size: 100,
            optimizer: Optimizer::Radam,
            init_scale: 1e-2,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.lr_decay > 1.0) {
            return Err(Error::InvalidConfig("lr_decay must exceed 1".into()));
        }
        if self.epochs_per_threshold == 0 || self.threshold_rounds == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("SGD counts must be at least 1".into()));
        }
        if !(self.init_scale >= 0.0) {
            return Err(Error::InvalidConfig("init_scale must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscoveryConfig {
    pub method: Method,
    pub solver: Solver,
    #[serde(rename = "K")]
    pub k: usize,
    pub lambda: f64,
    pub alpha_th: f64,
    pub max_iters: usize,
    pub convergence_window: usize,
    pub convergence_tol: f64,
    /// Scale Gram columns to unit RMS before the ridge solve.
    pub normalize_columns: bool,
    pub sgd: Option<SgdConfig>,
    pub seed: u64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            method: Method::Euler,
            solver: Solver::ClosedForm,
            k: 1,
            lambda: 1e-2,
            alpha_th: 0.05,
            max_iters: 50,
            convergence_window: 5,
            convergence_tol: 1e-6,
            normalize_columns: false,
            sgd: None,
            seed: 0,
        }
    }
}

impl DiscoveryConfig {
    /// Per-system λ and threshold.
    pub fn for_system(system: System) -> Self {
        let (lambda, alpha_th) = match system {
            System::CubicOscillator | System::LinearOscillator | System::FitzHughNagumo => {
                (1e-2, 0.05)
            }
            System::Advection => (1e-2, 0.01),
            System::ReactionDiffusion2d => (1e-1, 0.05),
            System::KuramotoSivashinsky => (1e-6, 0.1),
        };
        // derivative columns differ by powers of the wavenumber, so PDE solves are rescaled
        let normalize_columns = !system.is_ode();
        Self { lambda, alpha_th, normalize_columns, ..Self::default() }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be finite and non-negative".into()));
        }
        if !(self.alpha_th >= 0.0 && self.alpha_th.is_finite()) {
            return Err(Error::InvalidConfig("alpha_th must be finite and non-negative".into()));
        }
        if self.max_iters == 0 || self.convergence_window == 0 {
            return Err(Error::InvalidConfig("iteration counts must be at least 1".into()));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::InvalidConfig("convergence_tol must be non-negative".into()));
        }
        if let Some(sgd) = &self.sgd {
            sgd.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationRecord {
    pub iter: usize,
    /// Mean squared one-step prediction residual.
    pub loss: f64,
    pub alpha_change: f64,
    pub active_count: usize,
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct DiscoveredModel {
    pub library: Library,
    pub coefficients: CoefficientMatrix,
    pub config: DiscoveryConfig,
    pub trace: Vec<IterationRecord>,
    pub dataset_fingerprint: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    library: Library,
    alpha: Vec<Vec<f64>>,
    active: Vec<Vec<bool>>,
    config: DiscoveryConfig,
    trace: Vec<IterationRecord>,
    dataset_fingerprint: String,
}

impl TryFrom<ModelFile> for DiscoveredModel {
    type Error = Error;
    fn try_from(f: ModelFile) -> Result<Self> {
        let coefficients =
            CoefficientMatrix::try_from(RawCoefficients { values: f.alpha, active: f.active })?;
        if coefficients.n_terms() != f.library.len() || coefficients.n_vars() != f.library.n_vars()
        {
            return Err(Error::LibraryMismatch(
                "coefficient shape does not match the library".into(),
            ));
        }
        if f.trace.is_empty() {
            return Err(Error::Format("model trace is empty".into()));
        }
        Ok(Self {
            library: f.library,
            coefficients,
            config: f.config,
            trace: f.trace,
            dataset_fingerprint: f.dataset_fingerprint,
        })
    }
}

impl From<DiscoveredModel> for ModelFile {
    fn from(m: DiscoveredModel) -> Self {
        let raw = RawCoefficients::from(m.coefficients);
        ModelFile {
            library: m.library,
            alpha: raw.values,
            active: raw.active,
            config: m.config,
            trace: m.trace,
            dataset_fingerprint: m.dataset_fingerprint,
        }
    }
}
