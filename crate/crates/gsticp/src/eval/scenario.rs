//! Random scenario generation: node placement and agent priors.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::models::{Belief3, NodeId, NodeState, Position3};
use crate::netsim::Network;
use crate::rng::{stream, substream};
use crate::scene::{Box3, Scene};

use super::ScenarioConfig;

const PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum GenError {
    #[error(
        "could not place node {node} outside buildings after {attempts} attempts; \
         the scene is too crowded"
    )]
    Placement { node: usize, attempts: usize },
}

fn uniform_in(bounds: &Box3, rng: &mut impl Rng) -> Position3 {
    let lo = bounds.min().to_array();
    let hi = bounds.max().to_array();
    let mut p = [0.0; 3];
    for c in 0..3 {
        let u: f64 = rng.gen();
        p[c] = lo[c] + u * (hi[c] - lo[c]);
    }
    Position3::from_array(p)
}

fn place_outside_buildings(
    scene: &Scene,
    node: usize,
    rng: &mut impl Rng,
) -> Result<Position3, GenError> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let p = uniform_in(scene.bounds(), rng);
        if !scene.buildings().iter().any(|b| b.contains_point(p)) {
            return Ok(p);
        }
    }
    Err(GenError::Placement {
        node,
        attempts: PLACEMENT_ATTEMPTS,
    })
}

fn gaussian_offset(std: f64, rng: &mut impl Rng) -> Position3 {
    if std == 0.0 {
        return Position3::default();
    }
    let mut p = [0.0; 3];
    for c in &mut p {
        let g: f64 = StandardNormal.sample(rng);
        *c = std * g;
    }
    Position3::from_array(p)
}

/// Places anchors then agents uniformly at random inside the scene bounds but
/// outside every building. Agent priors are centered on the true position
/// plus a `N(0, prior_std² I)` perturbation, with variance `prior_std²`, so
/// the prior is statistically consistent with its own mean error.
pub fn generate_scenario(
    config: &ScenarioConfig,
    scene: &Scene,
    run: u64,
) -> Result<Network, GenError> {
    let total = config.n_anchors + config.n_agents;
    let prior_var = (config.prior_std * config.prior_std).max(1e-12);
    let mut nodes = Vec::with_capacity(total);
    for i in 0..total {
        let mut rng = substream(config.seed, &[run, stream::PLACEMENT, i as u64]);
        let position = place_outside_buildings(scene, i, &mut rng)?;
        if i < config.n_anchors {
            nodes.push(NodeState::anchor(NodeId(i), position));
        } else {
            let mut prior_rng = substream(config.seed, &[run, stream::PRIOR, i as u64]);
            let mean = position + gaussian_offset(config.prior_std, &mut prior_rng);
            nodes.push(NodeState::agent(
                NodeId(i),
                position,
                Belief3::isotropic(mean, prior_var),
            ));
        }
    }
    Ok(Network::new(nodes, config.comm_range))
}
