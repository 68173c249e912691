//! The Monte-Carlo driver: independent seeded runs over a shared scene,
//! executed in parallel and merged in run order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::{NodeId, Position3};
use crate::netsim::{Counters, Simulator};
use crate::scene::{load_scene, Scene, SceneIndex};

use super::{generate_scenario, EvalError, ScenarioConfig};

/// One per-agent per-slot record, in the exact column order of results.csv.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run: u64,
    pub slot: usize,
    pub agent: usize,
    pub true_x: f64,
    pub true_y: f64,
    pub true_z: f64,
    pub est_x: f64,
    pub est_y: f64,
    pub est_z: f64,
    pub error: f64,
}

impl ResultRow {
    pub fn new(run: u64, slot: usize, agent: NodeId, truth: Position3, est: Position3) -> Self {
        Self {
            run,
            slot,
            agent: agent.0,
            true_x: truth.x,
            true_y: truth.y,
            true_z: truth.z,
            est_x: est.x,
            est_y: est.y,
            est_z: est.z,
            error: (truth - est).norm(),
        }
    }

    pub fn true_position(&self) -> Position3 {
        Position3::new(self.true_x, self.true_y, self.true_z)
    }

    pub fn estimate(&self) -> Position3 {
        Position3::new(self.est_x, self.est_y, self.est_z)
    }
}

/// Everything one Monte-Carlo run produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: u64,
    pub rows: Vec<ResultRow>,
    pub counters: Counters,
}

/// Per-slot detail of a single run (pre-iteration means included), for
/// analyses that need more than the flat rows.
#[derive(Debug, Clone)]
pub struct SlotRecord {
    pub slot: usize,
    pub truths: Vec<(NodeId, Position3)>,
    pub estimates: Vec<(NodeId, Position3)>,
    pub temporal_means: Vec<(NodeId, Position3)>,
}

#[derive(Debug, Clone)]
pub struct SingleRun {
    pub result: RunResult,
    pub slots: Vec<SlotRecord>,
}

/// Loads the configured scene, or builds an empty scene over `config.area`.
pub fn resolve_scene(config: &ScenarioConfig) -> Result<Scene, EvalError> {
    match &config.scene_path {
        Some(path) => Ok(load_scene(path)?),
        None => Ok(Scene::empty(config.area)),
    }
}

/// Executes one run: scenario generation, `n_slots` time slots, flat rows.
pub fn run_single(
    config: &ScenarioConfig,
    scene: &Scene,
    index: &SceneIndex,
    run: u64,
) -> Result<SingleRun, EvalError> {
    let net = generate_scenario(config, scene, run)?;
    let mut sim = Simulator::new(
        net,
        index,
        *scene.bounds(),
        config.sim_params(),
        config.seed,
        run,
    )?;
    let mut rows = Vec::with_capacity(config.n_slots * config.n_agents);
    let mut slots = Vec::with_capacity(config.n_slots);
    for slot in 0..config.n_slots {
        let outcome = sim.run_time_slot()?;
        let truths: Vec<(NodeId, Position3)> = outcome
            .estimates
            .iter()
            .map(|&(id, _)| (id, sim.net.node(id).true_position))
            .collect();
        for (&(id, est), &(_, truth)) in outcome.estimates.iter().zip(&truths) {
            rows.push(ResultRow::new(run, slot, id, truth, est));
        }
        slots.push(SlotRecord {
            slot,
            truths,
            estimates: outcome.estimates,
            temporal_means: outcome.temporal_means,
        });
    }
    Ok(SingleRun {
        result: RunResult {
            run,
            rows,
            counters: sim.counters,
        },
        slots,
    })
}

/// Runs `mc_runs` independent runs on an explicit scene (no file IO). Runs
/// execute in parallel; results are merged in run order, so output is
/// deterministic for a fixed config.
pub fn run_monte_carlo_on(
    config: &ScenarioConfig,
    scene: &Scene,
) -> Result<Vec<RunResult>, EvalError> {
    config.validate().map_err(EvalError::Config)?;
    let index = SceneIndex::for_scene(scene);
    let singles: Result<Vec<SingleRun>, EvalError> = (0..config.mc_runs as u64)
        .into_par_iter()
        .map(|run| {
            run_single(config, scene, &index, run).map_err(|e| EvalError::Run {
                run,
                source: Box::new(e),
            })
        })
        .collect();
    Ok(singles?.into_iter().map(|s| s.result).collect())
}

/// Runs the full configured experiment, resolving the scene from the config.
pub fn run_monte_carlo(config: &ScenarioConfig) -> Result<Vec<RunResult>, EvalError> {
    let scene = resolve_scene(config)?;
    run_monte_carlo_on(config, &scene)
}
