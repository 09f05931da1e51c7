//! Ridge regression through the normal equations.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Gram matrix `ΘᵀΘ` and right-hand sides `ΘᵀU̇`, assembled once and solved
/// on any subset of columns.
#[derive(Clone, Debug)]
pub struct NormalSystem {
    pub gram: Array2<f64>,
    pub rhs: Array2<f64>,
    pub n_rows: usize,
}

impl NormalSystem {
    pub fn assemble(features: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<Self> {
        let (n, p) = features.dim();
        let d = targets.ncols();
        if targets.nrows() != n {
            return Err(Error::ShapeMismatch(format!(
                "{n} feature rows but {} target rows",
                targets.nrows()
            )));
        }
        if n == 0 {
            return Err(Error::ShapeMismatch("no regression rows".into()));
        }
        if features.iter().chain(targets.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteFeatures);
        }
        let mut g = vec![0.0; p * p];
        let mut b = vec![0.0; p * d];
        for (x, y) in features.rows().into_iter().zip(targets.rows()) {
            for a in 0..p {
                let xa = x[a];
                if xa == 0.0 {
                    continue;
                }
                let ga = &mut g[a * p..(a + 1) * p];
                for c in a..p {
                    ga[c] += xa * x[c];
                }
                for v in 0..d {
                    b[a * d + v] += xa * y[v];
                }
            }
        }
        for a in 0..p {
            for c in 0..a {
                g[a * p + c] = g[c * p + a];
            }
        }
        Ok(Self {
            gram: Array2::from_shape_vec((p, p), g).expect("square"),
            rhs: Array2::from_shape_vec((p, d), b).expect("sized"),
            n_rows: n,
        })
    }

    /// Ridge coefficients of target `var` on columns `cols`.
    ///
    /// With `normalize`, columns are rescaled to unit RMS before `λI` is added
    /// and the solution is mapped back, which makes the penalty blind to the
    /// very different magnitudes of e.g. `u` and `u_xxxx`.
    pub fn solve(&self, cols: &[usize], var: usize, lambda: f64, normalize: bool) -> Result<Vec<f64>> {
        let q = cols.len();
        if q == 0 {
            return Ok(Vec::new());
        }
        let b: Vec<f64> = cols.iter().map(|&c| self.rhs[[c, var]]).collect();
        // zero right-hand side: the minimum-norm solution is zero whatever the rank
        if b.iter().all(|&x| x == 0.0) {
            return Ok(vec![0.0; q]);
        }
        let scale: Vec<f64> = cols
            .iter()
            .map(|&c| {
                if normalize {
                    let s = (self.gram[[c, c]] / self.n_rows as f64).sqrt();
                    if s > 0.0 { s } else { 1.0 }
                } else {
                    1.0
                }
            })
            .collect();
        let mut a = Array2::zeros((q, q));
        for (i, &ci) in cols.iter().enumerate() {
            for (j, &cj) in cols.iter().enumerate() {
                a[[i, j]] = self.gram[[ci, cj]] / (scale[i] * scale[j]);
            }
            a[[i, i]] += lambda;
        }
        let rhs: Vec<f64> = b.iter().zip(&scale).map(|(x, s)| x / s).collect();
        let beta = cholesky_solve(&a, &rhs, lambda == 0.0)?;
        Ok(beta.iter().zip(&scale).map(|(x, s)| x / s).collect())
    }
}

/// Solves `A x = b` for symmetric positive definite `A`.
///
/// `strict` rejects pivots that are tiny relative to the diagonal, which is how
/// rank deficiency shows up when nothing regularizes the system.
pub fn cholesky_solve(a: &Array2<f64>, b: &[f64], strict: bool) -> Result<Vec<f64>> {
    let n = b.len();
    let max_diag = (0..n).map(|i| a[[i, i]].abs()).fold(0.0, f64::max);
    let tol = if strict { 1e-12 * max_diag * n as f64 } else { 0.0 };
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > tol) {
                    return Err(Error::SingularSystem);
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Ok(x)
}

/// `(ΘᵀΘ + λI)⁻¹ ΘᵀU̇` on all columns, one column of coefficients per target.
pub fn ridge_solve(
    features: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    lambda: f64,
) -> Result<Array2<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig("lambda must be non-negative".into()));
    }
    let sys = NormalSystem::assemble(features, targets)?;
    let p = features.ncols();
    let cols: Vec<usize> = (0..p).collect();
    let mut out = Array2::zeros((p, targets.ncols()));
    for v in 0..targets.ncols() {
        for (c, x) in sys.solve(&cols, v, lambda, false)?.into_iter().enumerate() {
            out[[c, v]] = x;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_columns_project_targets() {
        let x = Array2::eye(3);
        let y = array![[1.0, -2.0], [3.0, 0.5], [0.25, 4.0]];
        assert_eq!(ridge_solve(x.view(), y.view(), 0.0).unwrap(), y);
    }

    #[test]
    fn exact_single_column_fit() {
        let x = array![[1.0], [2.0], [-3.0]];
        let y = &x * 2.0;
        assert_abs_diff_eq!(ridge_solve(x.view(), y.view(), 0.0).unwrap()[[0, 0]], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn rank_deficiency_without_ridge_is_singular() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let y = array![[1.0], [0.0], [2.0]];
        assert!(matches!(ridge_solve(x.view(), y.view(), 0.0), Err(Error::SingularSystem)));
        assert!(ridge_solve(x.view(), y.view(), 1e-3).is_ok());
    }

    #[test]
    fn non_finite_rejected() {
        let x = array![[f64::NAN]];
        assert!(matches!(
            ridge_solve(x.view(), x.view(), 1.0),
            Err(Error::NonFiniteFeatures)
        ));
    }

    #[test]
    fn residual_of_normal_equations_is_small() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((50, 6), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((50, 2), |_| rng.random_range(-1.0..1.0));
        let a = ridge_solve(x.view(), y.view(), 0.1).unwrap();
        let lhs = (x.t().dot(&x) + Array2::<f64>::eye(6) * 0.1).dot(&a);
        let rhs = x.t().dot(&y);
        let rel = (&lhs - &rhs).mapv(f64::abs).sum() / rhs.mapv(f64::abs).sum();
        assert!(rel < 1e-8);
    }

    #[test]
    fn normalization_is_a_change_of_variables_when_unregularized() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let x = Array2::from_shape_fn((40, 4), |(_, c)| rng.random_range(-1.0..1.0) * 10f64.powi(c as i32));
        let y = Array2::from_shape_fn((40, 1), |_| rng.random_range(-1.0..1.0));
        let sys = NormalSystem::assemble(x.view(), y.view()).unwrap();
        let a = sys.solve(&[0, 1, 2, 3], 0, 0.0, false).unwrap();
        let b = sys.solve(&[0, 1, 2, 3], 0, 0.0, true).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-9 * p.abs().max(1.0));
        }
    }

    #[test]
    fn subset_solve_matches_reduced_problem() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((30, 5), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((30, 1), |_| rng.random_range(-1.0..1.0));
        let sys = NormalSystem::assemble(x.view(), y.view()).unwrap();
        let sub = sys.solve(&[1, 3], 0, 0.2, false).unwrap();
        let xr = x.select(ndarray::Axis(1), &[1, 3]);
        let direct = ridge_solve(xr.view(), y.view(), 0.2).unwrap();
        assert_abs_diff_eq!(sub[0], direct[[0, 0]], epsilon = 1e-14);
        assert_abs_diff_eq!(sub[1], direct[[1, 0]], epsilon = 1e-14);
    }
}
