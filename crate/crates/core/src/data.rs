//! Snapshot datasets: time stamps, the spatial grid and the `[time, space, variable]`
//! state tensor, plus the training pairs derived from consecutive snapshots.

use ndarray::{s, Array3, ArrayView3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Strictly increasing sample times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidTimeGrid("non-finite time stamp".into()));
        }
        for (j, w) in times.windows(2).enumerate() {
            let h = w[1] - w[0];
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidTimeGrid(format!(
                    "times not strictly increasing at index {}",
                    j + 1
                )));
            }
        }
        Ok(Self { times })
    }

    /// `n` stamps `t0 + j * dt`; computed by multiplication so long grids do not drift.
    pub fn uniform(t0: f64, dt: f64, n: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidTimeGrid(format!("step must be positive, got {dt}")));
        }
        Self::new((0..n).map(|j| t0 + j as f64 * dt).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `h_j = t_{j+1} - t_j`.
    pub fn steps(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(t: TimeGrid) -> Self {
        t.times
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
}

/// Regular grid; points are flattened row-major, the last axis varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct SpatialGrid {
    dims: Vec<usize>,
    spacings: Vec<f64>,
    boundary: Boundary,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dims: Vec<usize>,
    spacings: Vec<f64>,
    boundary: Boundary,
}

impl TryFrom<RawGrid> for SpatialGrid {
    type Error = Error;
    fn try_from(r: RawGrid) -> Result<Self> {
        Self::new(r.dims, r.spacings, r.boundary)
    }
}

impl From<SpatialGrid> for RawGrid {
    fn from(g: SpatialGrid) -> Self {
        RawGrid { dims: g.dims, spacings: g.spacings, boundary: g.boundary }
    }
}

impl SpatialGrid {
    pub fn new(dims: Vec<usize>, spacings: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if dims.is_empty() || dims.len() != spacings.len() {
            return Err(Error::InvalidGrid("one spacing per axis required".into()));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidGrid("axis of length zero".into()));
        }
        if spacings.iter().any(|&dx| !(dx > 0.0 && dx.is_finite())) {
            return Err(Error::InvalidGrid("spacings must be positive".into()));
        }
        Ok(Self { dims, spacings, boundary })
    }

    /// Single dummy point used by ODE datasets.
    pub fn point() -> Self {
        Self { dims: vec![1], spacings: vec![1.0], boundary: Boundary::Periodic }
    }

    /// `n` points covering `[0, length)` with periodic wrap.
    pub fn periodic_1d(n: usize, length: f64) -> Result<Self> {
        Self::new(vec![n], vec![length / n as f64], Boundary::Periodic)
    }

    pub fn periodic_2d(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::new(
            vec![nx, ny],
            vec![lx / nx as f64, ly / ny as f64],
            Boundary::Periodic,
        )
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Number of spatial points `M`.
    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_point(&self) -> bool {
        self.size() == 1
    }

    /// Stride of `axis` in the flattened point index.
    pub fn stride(&self, axis: usize) -> usize {
        self.dims[axis + 1..].iter().product()
    }
}

/// Snapshots `states[j, m, v] = u_v(t_j, x_m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    grid: SpatialGrid,
    time: TimeGrid,
    states: Array3<f64>,
    pub noise_sigma: Option<f64>,
    pub seed: Option<u64>,
}

/// `(U_prev, U_next)` with the time stamp and step of every pair.
#[derive(Clone, Debug)]
pub struct TrainingPairs {
    pub prev: Array3<f64>,
    pub next: Array3<f64>,
    pub times: Vec<f64>,
    pub steps: Vec<f64>,
}

impl TrainingPairs {
    pub fn n_pairs(&self) -> usize {
        self.steps.len()
    }

    /// `N = J * M`.
    pub fn n_rows(&self) -> usize {
        self.prev.shape()[0] * self.prev.shape()[1]
    }
}

impl Dataset {
    pub fn new(grid: SpatialGrid, time: TimeGrid, states: Array3<f64>) -> Result<Self> {
        let (nt, m, d) = states.dim();
        if nt != time.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} time stamps but {} snapshots",
                time.len(),
                nt
            )));
        }
        if m != grid.size() {
            return Err(Error::ShapeMismatch(format!(
                "grid has {} points but states have {}",
                grid.size(),
                m
            )));
        }
        if d == 0 {
            return Err(Error::ShapeMismatch("no state variables".into()));
        }
        if let Some(index) = first_non_finite(states.iter()) {
            return Err(Error::NonFiniteState { index });
        }
        Ok(Self {
            grid,
            time,
            states: states.as_standard_layout().into_owned(),
            noise_sigma: None,
            seed: None,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn states(&self) -> ArrayView3<'_, f64> {
        self.states.view()
    }

    pub fn into_states(self) -> Array3<f64> {
        self.states
    }

    pub fn n_snapshots(&self) -> usize {
        self.states.shape()[0]
    }

    pub fn n_vars(&self) -> usize {
        self.states.shape()[2]
    }

    pub fn training_pairs(&self) -> Result<TrainingPairs> {
        let nt = self.n_snapshots();
        if nt < 2 {
            return Err(Error::EmptyDataset(nt));
        }
        let times = self.time.times();
        Ok(TrainingPairs {
            prev: self.states.slice(s![..nt - 1, .., ..]).to_owned(),
            next: self.states.slice(s![1.., .., ..]).to_owned(),
            times: times[..nt - 1].to_vec(),
            steps: self.time.steps(),
        })
    }

    /// SHA-256 over grid, times and states in canonical little-endian form.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"unrolled-sindy/dataset/v1");
        h.update((self.grid.dims.len() as u64).to_le_bytes());
        for (&n, &dx) in self.grid.dims.iter().zip(&self.grid.spacings) {
            h.update((n as u64).to_le_bytes());
            h.update(dx.to_le_bytes());
        }
        h.update((self.time.len() as u64).to_le_bytes());
        for t in self.time.times() {
            h.update(t.to_le_bytes());
        }
        h.update((self.n_vars() as u64).to_le_bytes());
        for x in self.states.iter() {
            h.update(x.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

pub(crate) fn first_non_finite<'a>(values: impl Iterator<Item = &'a f64>) -> Option<usize> {
    values.enumerate().find(|(_, x)| !x.is_finite()).map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn ramp(nt: usize) -> Dataset {
        let states = Array3::from_shape_fn((nt, 1, 2), |(j, _, v)| j as f64 + 10.0 * v as f64);
        Dataset::new(
            SpatialGrid::point(),
            TimeGrid::new((0..nt).map(|j| 0.5 * j as f64 * (j as f64 + 1.0)).collect()).unwrap(),
            states,
        )
        .unwrap()
    }

    #[test]
    fn three_snapshots_give_two_pairs() {
        let d = ramp(3);
        let p = d.training_pairs().unwrap();
        assert_eq!(p.n_pairs(), 2);
        assert_eq!(p.steps, vec![1.0, 2.0]);
        assert_eq!(p.prev[[0, 0, 1]], 10.0);
        assert_eq!(p.next[[1, 0, 0]], 2.0);
    }

    #[test]
    fn last_pair_ends_on_last_snapshot() {
        let d = ramp(7);
        let p = d.training_pairs().unwrap();
        assert_eq!(p.next.slice(s![5, .., ..]), d.states().slice(s![6, .., ..]));
    }

    #[test]
    fn single_snapshot_is_empty() {
        assert!(matches!(ramp(1).training_pairs(), Err(Error::EmptyDataset(1))));
    }

    #[test]
    fn non_increasing_times_rejected() {
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, f64::NAN]).is_err());
        assert!(TimeGrid::uniform(0.0, 0.0, 3).is_err());
    }

    #[test]
    fn non_finite_state_reports_index() {
        let mut s = Array3::zeros((2, 1, 2));
        s[[1, 0, 1]] = f64::INFINITY;
        let err = Dataset::new(SpatialGrid::point(), TimeGrid::uniform(0.0, 1.0, 2).unwrap(), s);
        assert!(matches!(err, Err(Error::NonFiniteState { index: 3 })));
    }

    #[test]
    fn fingerprint_detects_single_perturbation() {
        let a = ramp(5);
        let mut s = a.states().to_owned();
        s[[2, 0, 0]] += 1e-15 * s[[2, 0, 0]].abs().max(1.0);
        let b = Dataset::new(a.grid().clone(), a.time().clone(), s).unwrap();
        assert_eq!(a.fingerprint(), ramp(5).fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn grid_strides_are_row_major() {
        let g = SpatialGrid::periodic_2d(4, 3, 1.0, 1.0).unwrap();
        assert_eq!(g.size(), 12);
        assert_eq!(g.stride(0), 3);
        assert_eq!(g.stride(1), 1);
    }
}
