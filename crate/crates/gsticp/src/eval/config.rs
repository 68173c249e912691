//! Experiment configuration: a JSON file mirroring [`ScenarioConfig`]
//! field names in snake_case. Every field has a default, so partial configs
//! are valid; [`ScenarioConfig::validate`] checks cross-field consistency.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{MobilityParams, NlosParams, Position3};
use crate::netsim::{Algorithm, EauParams, SimError, SimParams};
use crate::scene::Box3;
use crate::sut::SutParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Full description of one experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_agents: usize,
    pub n_anchors: usize,
    /// Placement region; used as the scene bounds when `scene_path` is unset.
    pub area: Box3,
    pub comm_range: f64,
    pub n_slots: usize,
    pub l_max: usize,
    pub noise_std: f64,
    pub nlos: NlosParams,
    pub mobility: MobilityParams,
    /// Standard deviation of both the prior spread and the prior-mean
    /// perturbation around the true position.
    pub prior_std: f64,
    pub sut: SutParams,
    pub eau: EauParams,
    pub algorithm: Algorithm,
    /// Use ground-truth LOS/NLOS labels instead of geometric identification
    /// (upper-bound mode).
    pub oracle_nlos: bool,
    pub seed: u64,
    pub mc_runs: usize,
    /// Scene file with buildings; `null` means an empty scene over `area`.
    pub scene_path: Option<PathBuf>,
    /// Particle count for the SPAWN baseline.
    pub n_particles: usize,
    /// Overrides the per-algorithm default for geographic NLOS filtering.
    pub gie: Option<bool>,
    /// Aggregate CDFs over all slots instead of the final slot only.
    pub aggregate_all_slots: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_agents: 20,
            n_anchors: 8,
            area: Box3::new(
                Position3::new(0.0, 0.0, 0.0),
                Position3::new(1000.0, 600.0, 50.0),
            )
            .expect("static bounds"),
            comm_range: 300.0,
            n_slots: 1,
            l_max: 20,
            noise_std: 1.0,
            nlos: NlosParams::default(),
            mobility: MobilityParams::default(),
            prior_std: 10.0,
            sut: SutParams::default(),
            eau: EauParams::default(),
            algorithm: Algorithm::Gsticp,
            oracle_nlos: false,
            seed: 1,
            mc_runs: 1,
            scene_path: None,
            n_particles: 1000,
            gie: None,
            aggregate_all_slots: false,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// Geographic NLOS filtering, resolved from the algorithm default and the
    /// optional override.
    pub fn resolved_gie(&self) -> bool {
        self.gie.unwrap_or_else(|| self.algorithm.default_gie())
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            l_max: self.l_max,
            noise_std: self.noise_std,
            nlos: self.nlos,
            mobility: self.mobility,
            sut: self.sut,
            eau: self.eau,
            algorithm: self.algorithm,
            oracle_nlos: self.oracle_nlos,
            gie: self.resolved_gie(),
            n_particles: self.n_particles,
        }
    }

    /// Rejects inconsistent configurations before any slot runs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.comm_range > 0.0 && self.comm_range.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "comm_range must be positive, got {}",
                self.comm_range
            )));
        }
        if self.n_slots == 0 {
            return Err(ConfigError::Invalid("n_slots must be at least 1".into()));
        }
        if self.mc_runs == 0 {
            return Err(ConfigError::Invalid("mc_runs must be at least 1".into()));
        }
        if !(self.prior_std >= 0.0 && self.prior_std.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "prior_std must be nonnegative, got {}",
                self.prior_std
            )));
        }
        self.sim_params().validate()?;
        Ok(())
    }
}
