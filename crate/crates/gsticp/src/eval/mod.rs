//! Experiment harness: scenario configuration and generation, the
//! Monte-Carlo driver, error-CDF metrics, and CSV result serialization.

mod config;
mod metrics;
mod monte_carlo;
mod ranges;
mod report;
mod scenario;
mod sweep;

pub use config::{ConfigError, ScenarioConfig};
pub use metrics::{compute_cdf, final_slot_errors, median, CdfCurve, CdfPoint};
pub use monte_carlo::{
    resolve_scene, run_monte_carlo, run_monte_carlo_on, run_single, ResultRow, RunResult,
    SingleRun, SlotRecord,
};
pub use ranges::{parse_sweep, RangeError, RangeSpec, SweepParam};
pub use report::{read_results_csv, read_results_csv_path, write_results};
pub use scenario::{generate_scenario, GenError};
pub use sweep::{run_sweep, SweepPoint};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Sim(#[from] crate::netsim::SimError),
    #[error(transparent)]
    Range(#[from] RangeError),
    #[error("run {run}: {source}")]
    Run {
        run: u64,
        #[source]
        source: Box<EvalError>,
    },
    #[error("no errors to aggregate (empty result set)")]
    EmptyResults,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
