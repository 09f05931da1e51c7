//! Coefficient-error metric and support comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CoefficientMatrix;

/// `Σ_ij |α_pred − α_GT|` over the full coefficient grid.
pub fn l1_error(predicted: &CoefficientMatrix, ground_truth: &CoefficientMatrix) -> Result<f64> {
    if predicted.values().dim() != ground_truth.values().dim() {
        return Err(Error::LibraryMismatch(format!(
            "coefficients {:?} vs ground truth {:?}",
            predicted.values().dim(),
            ground_truth.values().dim()
        )));
    }
    Ok(predicted
        .values()
        .iter()
        .zip(ground_truth.values().iter())
        .map(|(a, b)| (a - b).abs())
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportComparison {
    /// Active set equals the ground-truth active set.
    pub correct: bool,
    /// Active entries absent from the ground truth.
    pub extra: usize,
    /// Ground-truth entries that were dropped.
    pub missing: usize,
}

pub fn compare_support(
    predicted: &CoefficientMatrix,
    ground_truth: &CoefficientMatrix,
) -> Result<SupportComparison> {
    if predicted.values().dim() != ground_truth.values().dim() {
        return Err(Error::LibraryMismatch("support shapes differ".into()));
    }
    let (mut extra, mut missing) = (0, 0);
    for (&p, &g) in predicted.active().iter().zip(ground_truth.active().iter()) {
        match (p, g) {
            (true, false) => extra += 1,
            (false, true) => missing += 1,
            _ => {}
        }
    }
    Ok(SupportComparison { correct: extra == 0 && missing == 0, extra, missing })
}
