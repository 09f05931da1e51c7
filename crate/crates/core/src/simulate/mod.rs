//! Reference data for the benchmark systems, plus subsampling, noise and
//! rollout of discovered models.

mod ks;
mod ode;
mod rd;

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, Array3, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SpatialGrid, TimeGrid};
use crate::dictionary::{standard_library, Library};
use crate::error::{Error, Result};
use crate::model::{CoefficientMatrix, DiscoveredModel};

pub use ks::etdrk4_coefficients;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum System {
    #[serde(rename = "cubic-oscillator")]
    CubicOscillator,
    #[serde(rename = "linear-oscillator")]
    LinearOscillator,
    #[serde(rename = "fitzhugh-nagumo")]
    FitzHughNagumo,
    #[serde(rename = "advection")]
    Advection,
    #[serde(rename = "reaction-diffusion")]
    ReactionDiffusion2d,
    #[serde(rename = "kuramoto-sivashinsky")]
    KuramotoSivashinsky,
}

impl System {
    pub const ALL: [System; 6] = [
        System::CubicOscillator,
        System::LinearOscillator,
        System::FitzHughNagumo,
        System::Advection,
        System::ReactionDiffusion2d,
        System::KuramotoSivashinsky,
    ];

    pub fn name(self) -> &'static str {
        match self {
            System::CubicOscillator => "cubic-oscillator",
            System::LinearOscillator => "linear-oscillator",
            System::FitzHughNagumo => "fitzhugh-nagumo",
            System::Advection => "advection",
            System::ReactionDiffusion2d => "reaction-diffusion",
            System::KuramotoSivashinsky => "kuramoto-sivashinsky",
        }
    }

    pub fn n_vars(self) -> usize {
        match self {
            System::Advection | System::KuramotoSivashinsky => 1,
            _ => 2,
        }
    }

    pub fn is_ode(self) -> bool {
        matches!(
            self,
            System::CubicOscillator | System::LinearOscillator | System::FitzHughNagumo
        )
    }

    /// Standard library on the default grid.
    pub fn library(self) -> Result<Library> {
        SystemSpec::default_for(self).library()
    }

    /// Non-zero coefficients of the governing equation as `(label, variable, value)`.
    pub fn ground_truth_terms(self) -> Vec<(&'static str, usize, f64)> {
        match self {
            System::CubicOscillator => vec![
                ("u^3", 0, -0.1),
                ("v^3", 0, 2.0),
                ("u^3", 1, -2.0),
                ("v^3", 1, -0.1),
            ],
            System::LinearOscillator => {
                vec![("u", 0, -0.1), ("v", 0, 2.0), ("u", 1, -2.0), ("v", 1, -0.1)]
            }
            System::FitzHughNagumo => vec![
                ("1", 0, 0.1),
                ("u", 0, 1.0),
                ("v", 0, -1.0),
                ("u^3", 0, -1.0 / 3.0),
                ("u", 1, 0.1),
                ("v", 1, -0.1),
            ],
            System::Advection => vec![("u_x", 0, -0.4)],
            System::KuramotoSivashinsky => {
                vec![("u_xx", 0, -1.0), ("u_xxxx", 0, -1.0), ("u u_x", 0, -5.0)]
            }
            System::ReactionDiffusion2d => vec![
                ("u", 0, 1.0),
                ("u^3", 0, -1.0),
                ("v^3", 0, 1.0),
                ("u_xx", 0, 0.1),
                ("u_yy", 0, 0.1),
                ("u^2 v", 0, 1.0),
                ("u v^2", 0, -1.0),
                ("v", 1, 1.0),
                ("u^3", 1, -1.0),
                ("v^3", 1, -1.0),
                ("v_xx", 1, 0.1),
                ("v_yy", 1, 0.1),
                ("u^2 v", 1, -1.0),
                ("u v^2", 1, -1.0),
            ],
        }
    }

    /// Ground-truth coefficients laid out against `library`.
    pub fn ground_truth(self, library: &Library) -> Result<CoefficientMatrix> {
        if library.n_vars() != self.n_vars() {
            return Err(Error::LibraryMismatch(format!(
                "{} has {} variables, library has {}",
                self,
                self.n_vars(),
                library.n_vars()
            )));
        }
        let mut a = Array2::zeros((library.len(), library.n_vars()));
        for (label, v, x) in self.ground_truth_terms() {
            let i = library.position(label).ok_or_else(|| {
                Error::LibraryMismatch(format!("library lacks ground-truth term {label:?}"))
            })?;
            a[[i, v]] = x;
        }
        CoefficientMatrix::from_values(a)
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for System {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        System::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown system {s:?}")))
    }
}

/// Regular box `[lower, upper)` split into `dims` cells per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub dims: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn point() -> Self {
        Self { dims: vec![1], lower: vec![0.0], upper: vec![1.0] }
    }

    pub fn grid(&self) -> Result<SpatialGrid> {
        if self.lower.len() != self.dims.len() || self.upper.len() != self.dims.len() {
            return Err(Error::InvalidGrid("domain bounds must match dims".into()));
        }
        let spacings = self
            .dims
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&n, (&a, &b))| (b - a) / n as f64)
            .collect();
        SpatialGrid::new(self.dims.clone(), spacings, crate::data::Boundary::Periodic)
    }

    /// Coordinate of grid index `i` along `axis`.
    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + i as f64 * (self.upper[axis] - self.lower[axis]) / self.dims[axis] as f64
    }
}

/// Everything needed to regenerate one reference dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub system: System,
    pub domain: Domain,
    pub t_end: f64,
    /// Recording interval.
    pub fine_dt: f64,
    /// Internal integrator steps per recording interval (ignored by the exact advection solution).
    pub substeps: usize,
    /// ODE initial state; PDE initial fields are fixed closed forms.
    pub initial: Vec<f64>,
}

impl SystemSpec {
    pub fn default_for(system: System) -> Self {
        let ode = |t_end: f64, fine_dt: f64, substeps: usize, initial: Vec<f64>| SystemSpec {
            system,
            domain: Domain::point(),
            t_end,
            fine_dt,
            substeps,
            initial,
        };
        match system {
            System::CubicOscillator => ode(10.0, 2e-4, 10, vec![-0.488, 1.096]),
            System::LinearOscillator => ode(20.0, 1e-3, 10, vec![2.0, 0.0]),
            System::FitzHughNagumo => ode(50.0, 1e-2, 10, vec![-1.0, 1.0]),
            System::Advection => SystemSpec {
                system,
                domain: Domain { dims: vec![128], lower: vec![0.0], upper: vec![1.0] },
                t_end: 2.0,
                fine_dt: 2e-4,
                substeps: 1,
                initial: vec![],
            },
            System::KuramotoSivashinsky => SystemSpec {
                system,
                domain: Domain { dims: vec![100], lower: vec![0.0], upper: vec![64.0] },
                t_end: 100.0,
                fine_dt: 1e-3,
                substeps: 1,
                initial: vec![],
            },
            System::ReactionDiffusion2d => SystemSpec {
                system,
                domain: Domain {
                    dims: vec![64, 64],
                    lower: vec![-10.0, -10.0],
                    upper: vec![10.0, 10.0],
                },
                t_end: 10.0,
                fine_dt: 0.0125,
                substeps: 25,
                initial: vec![],
            },
        }
    }

    pub fn grid(&self) -> Result<SpatialGrid> {
        self.domain.grid()
    }

    pub fn library(&self) -> Result<Library> {
        standard_library(self.system, &self.grid()?)
    }

    pub fn ground_truth(&self) -> Result<CoefficientMatrix> {
        self.system.ground_truth(&self.library()?)
    }

    /// Number of recorded snapshots.
    pub fn n_snapshots(&self) -> Result<usize> {
        let ratio = self.t_end / self.fine_dt;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "t_end {} is not a multiple of fine_dt {}",
                self.t_end, self.fine_dt
            )));
        }
        Ok(n as usize + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fine_dt > 0.0 && self.fine_dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("fine_dt must be positive, got {}", self.fine_dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidConfig(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidConfig("substeps must be at least 1".into()));
        }
        self.n_snapshots()?;
        let grid = self.grid()?;
        let point = grid.is_point();
        if self.system.is_ode() != point {
            return Err(Error::GridMismatch(format!("{} on grid {:?}", self.system, grid.dims())));
        }
        if self.system.is_ode() && self.initial.len() != 2 {
            return Err(Error::InvalidConfig("ODE systems need a two-value initial state".into()));
        }
        if self.initial.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("initial state must be finite".into()));
        }
        let ndim = if self.system == System::ReactionDiffusion2d { 2 } else { 1 };
        if !point && grid.ndim() != ndim {
            return Err(Error::GridMismatch(format!("{} needs a {ndim}-d grid", self.system)));
        }
        Ok(())
    }

    /// Initial field `[M, d₂]`.
    pub fn initial_state(&self) -> Result<Array2<f64>> {
        let d = &self.domain;
        Ok(match self.system {
            s if s.is_ode() => Array2::from_shape_vec((1, 2), self.initial.clone())
                .map_err(|e| Error::InvalidConfig(e.to_string()))?,
            System::Advection => Array2::from_shape_fn((d.dims[0], 1), |(i, _)| {
                (2.0 * std::f64::consts::PI * d.coordinate(0, i)).sin()
            }),
            System::KuramotoSivashinsky => {
                let mid = 0.5 * (d.lower[0] + d.upper[0]);
                Array2::from_shape_fn((d.dims[0], 1), |(i, _)| {
                    let x = d.coordinate(0, i) - mid;
                    0.5 * (-100.0 * x * x).exp()
                })
            }
            _ => {
                let ny = d.dims[1];
                Array2::from_shape_fn((d.dims[0] * ny, 2), |(idx, v)| {
                    let (x, y) = (d.coordinate(0, idx / ny), d.coordinate(1, idx % ny));
                    if v == 0 { (-(x * x + y * y) / 2.0).exp() } else { 0.0 }
                })
            }
        })
    }
}

/// Generates the reference dataset described by `spec`.
pub fn simulate(spec: &SystemSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n_snapshots()?;
    let grid = spec.grid()?;
    let time = TimeGrid::uniform(0.0, spec.fine_dt, n)?;
    let u0 = spec.initial_state()?;
    let states = match spec.system {
        System::Advection => {
            let d = &spec.domain;
            Array3::from_shape_fn((n, d.dims[0], 1), |(j, i, _)| {
                let t = time.times()[j];
                (2.0 * std::f64::consts::PI * (d.coordinate(0, i) - 0.4 * t)).sin()
            })
        }
        System::KuramotoSivashinsky => ks::simulate(&u0, &spec.domain, spec.fine_dt, spec.substeps, n)?,
        System::ReactionDiffusion2d => rd::simulate(&u0, &grid, spec.fine_dt, spec.substeps, n)?,
        s => ode::simulate(s, u0.row(0).as_slice().expect("row"), spec.fine_dt, spec.substeps, n)?,
    };
    Dataset::new(grid, time, states)
}

/// Keeps every `stride`-th snapshot.
pub fn subsample(dataset: &Dataset, stride: usize) -> Result<Dataset> {
    if stride == 0 {
        return Err(Error::InvalidConfig("stride must be at least 1".into()));
    }
    let idx: Vec<usize> = (0..dataset.n_snapshots()).step_by(stride).collect();
    if idx.len() < 2 {
        return Err(Error::EmptyDataset(idx.len()));
    }
    let times: Vec<f64> = idx.iter().map(|&j| dataset.time().times()[j]).collect();
    let states = dataset.states().select(ndarray::Axis(0), &idx);
    let mut out = Dataset::new(dataset.grid().clone(), TimeGrid::new(times)?, states)?;
    out.noise_sigma = dataset.noise_sigma;
    out.seed = dataset.seed;
    Ok(out)
}

/// Stride that turns recording interval `fine_dt` into observation step `h`.
pub fn stride_for(h: f64, fine_dt: f64) -> Result<usize> {
    let r = h / fine_dt;
    let s = r.round();
    if s < 1.0 || (r - s).abs() > 1e-6 * r {
        return Err(Error::InvalidConfig(format!(
            "h = {h} is not a positive multiple of the recording interval {fine_dt}"
        )));
    }
    Ok(s as usize)
}

/// Adds Gaussian noise with per-variable std `σ · std(u_v)` over the whole dataset.
pub fn add_noise(dataset: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("sigma must be non-negative, got {sigma}")));
    }
    let mut states = dataset.states().to_owned();
    if sigma > 0.0 {
        let d = dataset.n_vars();
        let stds: Vec<f64> = (0..d)
            .map(|v| {
                let col = dataset.states().slice_move(s![.., .., v]);
                let n = col.len() as f64;
                let mean = col.sum() / n;
                (col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        for row in states.as_slice_mut().expect("owned").chunks_exact_mut(d) {
            for (x, s) in row.iter_mut().zip(&stds) {
                *x += sigma * s * normal.sample(&mut rng);
            }
        }
    }
    let mut out = Dataset::new(dataset.grid().clone(), dataset.time().clone(), states)?;
    out.noise_sigma = Some(sigma);
    out.seed = Some(seed);
    Ok(out)
}

/// Integrates `du/dt = Θ(u) α` with RK4 at step `dt`, recording every step.
pub fn rollout(
    model: &DiscoveredModel,
    initial: ArrayView2<'_, f64>,
    grid: &SpatialGrid,
    t_end: f64,
    dt: f64,
) -> Result<Dataset> {
    let lib = &model.library;
    if lib.grid() != grid {
        return Err(Error::GridMismatch("model library was built on another grid".into()));
    }
    let (m, d) = initial.dim();
    if m != grid.size() || d != lib.n_vars() {
        return Err(Error::ShapeMismatch("initial state does not fit the model".into()));
    }
    if !(dt > 0.0 && t_end > 0.0) {
        return Err(Error::InvalidConfig("rollout needs positive t_end and dt".into()));
    }
    let n = (t_end / dt).round() as usize + 1;
    let p = lib.len();
    let alpha = model.coefficients.values().as_standard_layout().to_owned();
    let a = alpha.as_slice().expect("owned");
    let mut out = Array3::zeros((n, m, d));
    let mut u: Vec<f64> = initial.iter().copied().collect();
    out.slice_mut(s![0, .., ..]).assign(&initial);
    let mut theta = vec![0.0; m * p];
    let mut scratch = Vec::new();
    let mut ks = vec![vec![0.0; m * d]; 4];
    let mut stage = vec![0.0; m * d];
    for j in 1..n {
        let t = (j - 1) as f64 * dt;
        for s in 0..4 {
            let c = [0.0, 0.5, 0.5, 1.0][s];
            for i in 0..m * d {
                stage[i] = if s == 0 { u[i] } else { u[i] + c * dt * ks[s - 1][i] };
            }
            lib.eval_snapshot(&stage, t + c * dt, &mut theta, &mut scratch);
            crate::unroll::apply_alpha(&theta, a, p, d, &mut ks[s]);
        }
        for i in 0..m * d {
            u[i] += dt / 6.0 * (ks[0][i] + 2.0 * ks[1][i] + 2.0 * ks[2][i] + ks[3][i]);
        }
        if u.iter().any(|x| !x.is_finite() || x.abs() > 1e12) {
            return Err(Error::SimulationDiverged { time: j as f64 * dt });
        }
        for (o, &x) in out.slice_mut(s![j, .., ..]).iter_mut().zip(&u) {
            *o = x;
        }
    }
    Dataset::new(grid.clone(), TimeGrid::uniform(0.0, dt, n)?, out)
}

/// Mean absolute difference between two datasets of equal shape.
pub fn mean_absolute_error(a: &Dataset, b: &Dataset) -> Result<f64> {
    if a.states().dim() != b.states().dim() {
        return Err(Error::ShapeMismatch("datasets differ in shape".into()));
    }
    let n = a.states().len() as f64;
    Ok(a.states().iter().zip(b.states().iter()).map(|(x, y)| (x - y).abs()).sum::<f64>() / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiscoveryConfig, IterationRecord};
    use proptest::prelude::*;

    fn gt_model(system: System, spec: &SystemSpec) -> DiscoveredModel {
        let library = spec.library().unwrap();
        DiscoveredModel {
            coefficients: system.ground_truth(&library).unwrap(),
            library,
            config: DiscoveryConfig::default(),
            trace: vec![IterationRecord { iter: 1, loss: 0.0, alpha_change: 0.0, active_count: 0, diverged: false }],
            dataset_fingerprint: String::new(),
        }
    }

    #[test]
    fn ground_truth_supports() {
        for s in System::ALL {
            let gt = s.ground_truth(&s.library().unwrap()).unwrap();
            assert_eq!(gt.active_count(), s.ground_truth_terms().len(), "{s}");
        }
    }

    #[test]
    fn system_names_round_trip() {
        for s in System::ALL {
            assert_eq!(s.name().parse::<System>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
    }

    #[test]
    fn cubic_snapshot_count_and_strides() {
        let d = simulate(&SystemSpec::default_for(System::CubicOscillator)).unwrap();
        assert_eq!(d.n_snapshots(), 50_001);
        assert_eq!(d.training_pairs().unwrap().n_pairs(), 50_000);
        let h02 = subsample(&d, 100).unwrap();
        assert_eq!(h02.training_pairs().unwrap().n_pairs(), 500);
        assert!((h02.time().steps()[0] - 0.02).abs() < 1e-12);
        assert_eq!(subsample(&d, 3000).unwrap().training_pairs().unwrap().n_pairs(), 16);
        assert_eq!(subsample(&d, 1).unwrap(), d);
        assert!(matches!(subsample(&d, 60_000), Err(Error::EmptyDataset(1))));
        assert_eq!(stride_for(0.6, 2e-4).unwrap(), 3000);
        assert!(stride_for(0.00003, 2e-4).is_err());
    }

    #[test]
    fn cubic_radius_never_grows() {
        let d = simulate(&SystemSpec::default_for(System::CubicOscillator)).unwrap();
        let r: Vec<f64> = d
            .states()
            .outer_iter()
            .map(|s| (s[[0, 0]].powi(4) + s[[0, 1]].powi(4)).sqrt())
            .collect();
        // V = x^4 + y^4 is a Lyapunov function: dV/dt = -0.4 (x^6 + y^6)
        assert!(r.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let n: Vec<f64> = d.states().outer_iter().map(|s| s[[0, 0]].hypot(s[[0, 1]])).collect();
        assert!(n.last().unwrap() < &n[0]);
    }

    #[test]
    fn advection_is_exact() {
        let spec = SystemSpec::default_for(System::Advection);
        let d = simulate(&spec).unwrap();
        let j = 1234;
        let t = d.time().times()[j];
        for i in [0, 17, 127] {
            let x = i as f64 / 128.0;
            let exact = (2.0 * std::f64::consts::PI * (x - 0.4 * t)).sin();
            assert!((d.states()[[j, i, 0]] - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn noise_statistics_and_determinism() {
        let d = simulate(&SystemSpec::default_for(System::CubicOscillator)).unwrap();
        assert_eq!(add_noise(&d, 0.0, 1).unwrap().states(), d.states());
        let a = add_noise(&d, 0.02, 9).unwrap();
        assert_eq!(a, add_noise(&d, 0.02, 9).unwrap());
        for v in 0..2 {
            let col = d.states().slice_move(s![.., 0, v]).to_owned();
            let mean = col.mean().unwrap();
            let std = col.mapv(|x| (x - mean).powi(2)).mean().unwrap().sqrt();
            let diff = &a.states().slice(s![.., 0, v]) - &col;
            let sd = diff.mapv(|x| x * x).mean().unwrap().sqrt();
            assert!((sd / (0.02 * std) - 1.0).abs() < 0.05);
            // lag-1 autocorrelation of independent noise is O(1/sqrt(N))
            let n = diff.len();
            let ac = (0..n - 1).map(|i| diff[i] * diff[i + 1]).sum::<f64>() / (n as f64 * sd * sd);
            assert!(ac.abs() < 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn rollout_of_zero_model_is_constant() {
        let spec = SystemSpec::default_for(System::CubicOscillator);
        let mut m = gt_model(System::CubicOscillator, &spec);
        m.coefficients = CoefficientMatrix::zeros(15, 2);
        let u0 = spec.initial_state().unwrap();
        let r = rollout(&m, u0.view(), &spec.grid().unwrap(), 1.0, 0.1).unwrap();
        assert!(r.states().outer_iter().all(|s| s == u0));
    }

    #[test]
    fn advection_rollout_tracks_exact_solution() {
        let spec = SystemSpec { t_end: 0.5, fine_dt: 1e-3, ..SystemSpec::default_for(System::Advection) };
        let exact = simulate(&spec).unwrap();
        let m = gt_model(System::Advection, &spec);
        let u0 = spec.initial_state().unwrap();
        let r = rollout(&m, u0.view(), &spec.grid().unwrap(), 0.5, 1e-3).unwrap();
        let mae = mean_absolute_error(&r, &exact).unwrap();
        // phase error of the central difference: 0.4 t k (1 − sin(k dx)/(k dx))
        assert!(mae < 2e-3, "{mae}");
    }

    #[test]
    fn cubic_rollout_matches_reference() {
        let spec = SystemSpec::default_for(System::CubicOscillator);
        let data = simulate(&spec).unwrap();
        let m = gt_model(System::CubicOscillator, &spec);
        let u0 = spec.initial_state().unwrap();
        let r = rollout(&m, u0.view(), &spec.grid().unwrap(), 10.0, 0.01).unwrap();
        let refd = subsample(&data, 50).unwrap();
        assert!(mean_absolute_error(&r, &refd).unwrap() < 1e-6);
    }

    #[test]
    fn reaction_diffusion_initial_field() {
        let spec = SystemSpec::default_for(System::ReactionDiffusion2d);
        let u0 = spec.initial_state().unwrap();
        // index of (0, 0): both coordinates hit zero at i = 32
        assert_eq!(u0[[32 * 64 + 32, 0]], 1.0);
        assert_eq!(u0[[0, 0]], (-100.0f64).exp());
        assert!(u0.column(1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = SystemSpec::default_for(System::CubicOscillator);
        s.fine_dt = 0.0;
        assert!(simulate(&s).is_err());
        let mut s = SystemSpec::default_for(System::Advection);
        s.domain = Domain::point();
        assert!(matches!(s.validate(), Err(Error::GridMismatch(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn subsample_composes(a in 1usize..7, b in 1usize..7) {
            let spec = SystemSpec { t_end: 2.0, fine_dt: 0.01, ..SystemSpec::default_for(System::LinearOscillator) };
            let d = simulate(&spec).unwrap();
            let ab = subsample(&subsample(&d, a).unwrap(), b).unwrap();
            prop_assert_eq!(ab, subsample(&d, a * b).unwrap());
        }
    }
}
