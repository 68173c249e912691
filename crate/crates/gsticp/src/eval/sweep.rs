//! Parameter sweeps: repeat the configured experiment while varying one
//! config field, collecting a CDF per point.

use super::{
    compute_cdf, final_slot_errors, median, resolve_scene, run_monte_carlo_on, CdfCurve,
    EvalError, ScenarioConfig, SweepParam,
};

/// One sweep point: the varied value, its CDF, and summary statistics.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub param: &'static str,
    pub value: f64,
    pub curve: CdfCurve,
    pub median_error: f64,
    /// `P(e ≤ 5 m)`, the headline operating point for trend plots.
    pub p_at_5m: f64,
}

/// Runs the experiment once per sweep value. The scene is resolved once; the
/// swept field never affects it.
pub fn run_sweep(
    base: &ScenarioConfig,
    param: SweepParam,
    values: &[f64],
    epsilons: &[f64],
) -> Result<Vec<SweepPoint>, EvalError> {
    let scene = resolve_scene(base)?;
    let mut eps = epsilons.to_vec();
    if !eps.iter().any(|&e| (e - 5.0).abs() < 1e-9) {
        eps.push(5.0);
    }
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let mut config = base.clone();
        param.apply(&mut config, value)?;
        let results = run_monte_carlo_on(&config, &scene)?;
        let curve = compute_cdf(
            &results,
            &eps,
            config.aggregate_all_slots,
            config.algorithm.label(),
        )?;
        let errors = final_slot_errors(&results, config.aggregate_all_slots);
        points.push(SweepPoint {
            param: param.label(),
            value,
            p_at_5m: curve.p_at(5.0).unwrap_or(0.0),
            median_error: median(&errors).unwrap_or(f64::NAN),
            curve,
        });
    }
    Ok(points)
}
