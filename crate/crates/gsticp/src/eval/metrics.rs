//! Positioning-error metrics: empirical CDF curves `P(e ≤ ε)`.

use serde::{Deserialize, Serialize};

use super::{EvalError, RunResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub epsilon: f64,
    pub p: f64,
}

/// An empirical error CDF, labeled with the algorithm it belongs to.
/// Thresholds ascend and probabilities are nondecreasing in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfCurve {
    pub label: String,
    pub points: Vec<CdfPoint>,
}

impl CdfCurve {
    /// P(e ≤ ε) at the given threshold, if present.
    pub fn p_at(&self, epsilon: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|pt| (pt.epsilon - epsilon).abs() < 1e-9)
            .map(|pt| pt.p)
    }

    /// Smallest threshold where the curve reaches probability `p`.
    pub fn epsilon_at_p(&self, p: f64) -> Option<f64> {
        self.points.iter().find(|pt| pt.p >= p).map(|pt| pt.epsilon)
    }
}

/// Errors entering the CDF: final-slot rows by default, all slots optionally.
pub fn final_slot_errors(results: &[RunResult], all_slots: bool) -> Vec<f64> {
    let last = results
        .iter()
        .flat_map(|r| r.rows.iter())
        .map(|row| row.slot)
        .max();
    results
        .iter()
        .flat_map(|r| r.rows.iter())
        .filter(|row| all_slots || Some(row.slot) == last)
        .map(|row| row.error)
        .collect()
}

/// Empirical `P(e ≤ ε)` over the given thresholds (sorted ascending first).
pub fn compute_cdf(
    results: &[RunResult],
    epsilons: &[f64],
    all_slots: bool,
    label: &str,
) -> Result<CdfCurve, EvalError> {
    let errors = final_slot_errors(results, all_slots);
    if errors.is_empty() {
        return Err(EvalError::EmptyResults);
    }
    let mut eps: Vec<f64> = epsilons.to_vec();
    eps.sort_by(|a, b| a.partial_cmp(b).expect("finite thresholds"));
    let total = errors.len() as f64;
    let points = eps
        .into_iter()
        .map(|epsilon| {
            let count = errors.iter().filter(|&&e| e <= epsilon).count();
            CdfPoint {
                epsilon,
                p: count as f64 / total,
            }
        })
        .collect();
    Ok(CdfCurve {
        label: label.to_string(),
        points,
    })
}

/// Median of a sample; `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}
