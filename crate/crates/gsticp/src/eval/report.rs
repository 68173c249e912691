//! CSV serialization of results, CDF curves, and counters.
//!
//! Floating-point values are written in shortest round-trip form, so a
//! written file re-parses to exactly the values that produced it and
//! identical runs produce byte-identical files.

use std::fs;
use std::io::Read;
use std::path::Path;

use super::{CdfCurve, EvalError, ResultRow, RunResult, ScenarioConfig};

fn io_err(path: &Path, source: std::io::Error) -> EvalError {
    EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `results.csv`, `cdf.csv`, `counters.csv`, and the resolved config
/// into `out_dir` (created if missing).
pub fn write_results(
    results: &[RunResult],
    curves: &[CdfCurve],
    config: &ScenarioConfig,
    out_dir: impl AsRef<Path>,
) -> Result<(), EvalError> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;

    let results_path = out_dir.join("results.csv");
    let mut w = csv::Writer::from_path(&results_path)?;
    for run in results {
        for row in &run.rows {
            w.serialize(row)?;
        }
    }
    w.flush().map_err(|e| io_err(&results_path, e))?;

    let cdf_path = out_dir.join("cdf.csv");
    let mut w = csv::Writer::from_path(&cdf_path)?;
    w.write_record(["algorithm", "epsilon", "p"])?;
    for curve in curves {
        for pt in &curve.points {
            w.write_record([
                curve.label.as_str(),
                &pt.epsilon.to_string(),
                &pt.p.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| io_err(&cdf_path, e))?;

    let counters_path = out_dir.join("counters.csv");
    let mut w = csv::Writer::from_path(&counters_path)?;
    w.write_record(["run", "counter", "value"])?;
    for run in results {
        let c = &run.counters;
        for (name, value) in c.rows() {
            w.write_record([&run.run.to_string(), name, &(value as f64).to_string()])?;
        }
        // Derived broadcast-load constants: the measured per-agent scalar
        // cost per iteration, next to the cost a per-sigma-point
        // (mean, variance) encoding would incur.
        let per_agent = if c.agent_broadcasts > 0 {
            c.agent_broadcast_scalars as f64 / c.agent_broadcasts as f64
        } else {
            0.0
        };
        w.write_record([
            &run.run.to_string(),
            "broadcast_scalars_per_agent_iteration",
            &per_agent.to_string(),
        ])?;
        w.write_record([
            &run.run.to_string(),
            "broadcast_scalars_sigma_point_encoding",
            &14.0f64.to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_err(&counters_path, e))?;

    let config_path = out_dir.join("config.json");
    let text = serde_json::to_string_pretty(config)
        .map_err(|e| EvalError::Config(super::ConfigError::Parse(e)))?;
    fs::write(&config_path, text).map_err(|e| io_err(&config_path, e))?;
    Ok(())
}

/// Parses a results.csv stream back into rows.
pub fn read_results_csv(reader: impl Read) -> Result<Vec<ResultRow>, EvalError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for record in r.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

pub fn read_results_csv_path(path: impl AsRef<Path>) -> Result<Vec<ResultRow>, EvalError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    read_results_csv(file)
}
