//! Discrete-time network simulator: neighbor discovery, per-slot measurement
//! collection, geographic NLOS filtering, the synchronous (Jacobi) iteration
//! schedule, the anchor-upgrading state machine, and instrumentation
//! counters.
//!
//! One time slot runs: mobility (ground truth) → internal measurements →
//! external measurement generation (LOS/NLOS decided from true positions) →
//! temporal prediction → belief initialization → estimate-based NLOS
//! identification and discard → `l_max` message-passing iterations → MMSE
//! estimates. Within an iteration every active agent reads only the previous
//! iteration's broadcasts, so results are independent of agent processing
//! order.

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{
    particle_mmse, spa_te_spatial_message, spawn_particle_update, ParticleBelief,
    RangeObservation,
};
use crate::models::{
    generate_internal_measurement, generate_ranging_measurement, mobility_step, true_range,
    Belief3, LinkClass, MobilityParams, NlosParams, NodeId, NodeKind, NodeState, Position3,
    RangeMeasurement,
};
use crate::rng::{stream, substream};
use crate::scene::{classify_link, Box3, SceneIndex};
use crate::sut::{
    fuse_belief, mmse_estimate, moderate_agent_message, sut_spatial_message, temporal_prediction,
    MessageMode, SpatialMessage, SutError, SutParams, TemporalMessage,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("EAU thresholds must satisfy 0 < eta1 < eta2, got eta1={eta1}, eta2={eta2}")]
    InvalidEauThresholds { eta1: f64, eta2: f64 },
    #[error("noise_std must be positive, got {0}")]
    NonPositiveNoise(f64),
    #[error("comm_range must be positive, got {0}")]
    NonPositiveCommRange(f64),
    #[error("the SPAWN baseline is definitionally without NLOS identification; oracle_nlos cannot be enabled")]
    SpawnWithOracle,
    #[error("the SPAWN baseline is definitionally without NLOS identification; gie cannot be enabled")]
    SpawnWithGie,
    #[error("SPAWN requires at least 100 particles, got {0}")]
    TooFewParticles(usize),
    #[error("damping must lie in [0, 1), got {0}")]
    InvalidDamping(f64),
    #[error("nlos bias_std must be nonnegative, got {0}")]
    NegativeBiasStd(f64),
    #[error("mobility standard deviations must be nonnegative")]
    NegativeMobilityStd,
    #[error(transparent)]
    Sut(#[from] SutError),
}

/// The localization algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Sigma-point message passing with geographic NLOS identification.
    Gsticp,
    /// Same schedule, but messages are the likelihood moments as derived
    /// (audit mode).
    GsticpLiteral,
    /// First-order-Taylor messages, no NLOS identification.
    SpaTe,
    /// First-order-Taylor messages with geographic NLOS identification.
    SpaTeGie,
    /// Particle localizer without NLOS identification.
    Spawn,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Gsticp => "gsticp",
            Algorithm::GsticpLiteral => "gsticp-literal",
            Algorithm::SpaTe => "spa-te",
            Algorithm::SpaTeGie => "spa-te-gie",
            Algorithm::Spawn => "spawn",
        }
    }

    /// Whether geographic NLOS filtering is on by default for this algorithm.
    pub fn default_gie(self) -> bool {
        matches!(
            self,
            Algorithm::Gsticp | Algorithm::GsticpLiteral | Algorithm::SpaTeGie
        )
    }

    pub fn is_spawn(self) -> bool {
        self == Algorithm::Spawn
    }

    fn sut_mode(self) -> Option<MessageMode> {
        match self {
            Algorithm::Gsticp => Some(MessageMode::Default),
            Algorithm::GsticpLiteral => Some(MessageMode::Literal),
            _ => None,
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gsticp" => Ok(Algorithm::Gsticp),
            "gsticp-literal" => Ok(Algorithm::GsticpLiteral),
            "spa-te" => Ok(Algorithm::SpaTe),
            "spa-te-gie" => Ok(Algorithm::SpaTeGie),
            "spawn" => Ok(Algorithm::Spawn),
            other => Err(format!(
                "unknown algorithm {other:?}; expected one of gsticp, gsticp-literal, spa-te, spa-te-gie, spawn"
            )),
        }
    }
}

/// Anchor-upgrading thresholds: an agent whose estimate moves less than
/// `eta1` between consecutive iterations is upgraded to a pseudo-anchor; a
/// move in `[eta1, eta2)` skips the next iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EauParams {
    pub eta1: f64,
    pub eta2: f64,
    pub enabled: bool,
}

impl Default for EauParams {
    fn default() -> Self {
        Self {
            eta1: 0.05,
            eta2: 0.5,
            enabled: false,
        }
    }
}

impl EauParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.enabled && !(self.eta1 > 0.0 && self.eta1 < self.eta2 && self.eta2.is_finite()) {
            return Err(SimError::InvalidEauThresholds {
                eta1: self.eta1,
                eta2: self.eta2,
            });
        }
        Ok(())
    }
}

/// Per-slot agent status under anchor upgrading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentStatus {
    Active,
    SkipNext,
    PseudoAnchor,
}

/// Outcome of the consecutive-iteration estimate-delta test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EauDecision {
    Upgrade,
    SkipNext,
    Continue,
}

/// Classifies the per-iteration estimate change: `delta` is the maximum
/// absolute mean change over the three coordinates.
pub fn eau_classify(prev: Position3, new: Position3, params: &EauParams) -> EauDecision {
    debug_assert!(params.enabled);
    let d = new - prev;
    let delta = d.x.abs().max(d.y.abs()).max(d.z.abs());
    if delta < params.eta1 {
        EauDecision::Upgrade
    } else if delta < params.eta2 {
        EauDecision::SkipNext
    } else {
        EauDecision::Continue
    }
}

/// Per-slot anchor-upgrading state: statuses and previous-iteration means,
/// indexed by node id. Reset at the start of every slot.
#[derive(Debug, Clone)]
pub struct EauState {
    statuses: Vec<AgentStatus>,
    prev_means: Vec<Option<Position3>>,
}

impl EauState {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            statuses: vec![AgentStatus::Active; n_nodes],
            prev_means: vec![None; n_nodes],
        }
    }

    pub fn reset_for_slot(&mut self) {
        for s in &mut self.statuses {
            *s = AgentStatus::Active;
        }
        for m in &mut self.prev_means {
            *m = None;
        }
    }

    pub fn status(&self, id: NodeId) -> AgentStatus {
        self.statuses[id.0]
    }

    pub fn set_prev_mean(&mut self, id: NodeId, mean: Position3) {
        self.prev_means[id.0] = Some(mean);
    }

    pub fn is_pseudo(&self, id: NodeId) -> bool {
        self.statuses[id.0] == AgentStatus::PseudoAnchor
    }
}

/// Per-run instrumentation totals. All counts are monotone within a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    /// Belief fusions performed (one per agent per non-skipped iteration).
    pub belief_updates: u64,
    /// Spatial messages computed (one per usable incoming link per update).
    pub spatial_messages: u64,
    /// Nonlinear range/likelihood propagations (7 per sigma-point message,
    /// 1 per linearized message, one per particle per factor).
    pub range_evals: u64,
    /// Full (mean, variance) belief broadcasts by agents.
    pub agent_broadcasts: u64,
    pub agent_broadcast_scalars: u64,
    /// Exact-position broadcasts (anchors and pseudo-anchors).
    pub dirac_broadcasts: u64,
    pub dirac_broadcast_scalars: u64,
    pub links_generated: u64,
    pub nlos_links_generated: u64,
    pub nlos_links_discarded: u64,
    pub pseudo_anchor_links_pruned: u64,
    pub quotient_fallbacks: u64,
    pub degenerate_links_skipped: u64,
    pub particle_divergences: u64,
    pub anchor_upgrades: u64,
    pub iteration_skips: u64,
}

impl Counters {
    pub fn merge(&mut self, other: &Counters) {
        for ((_, a), (_, b)) in self_rows_mut(self).into_iter().zip(other.rows()) {
            *a += b;
        }
    }

    /// Name/value pairs in a fixed order, for reports.
    pub fn rows(&self) -> Vec<(&'static str, u64)> {
        vec![
            ("belief_updates", self.belief_updates),
            ("spatial_messages", self.spatial_messages),
            ("range_evals", self.range_evals),
            ("agent_broadcasts", self.agent_broadcasts),
            ("agent_broadcast_scalars", self.agent_broadcast_scalars),
            ("dirac_broadcasts", self.dirac_broadcasts),
            ("dirac_broadcast_scalars", self.dirac_broadcast_scalars),
            ("links_generated", self.links_generated),
            ("nlos_links_generated", self.nlos_links_generated),
            ("nlos_links_discarded", self.nlos_links_discarded),
            ("pseudo_anchor_links_pruned", self.pseudo_anchor_links_pruned),
            ("quotient_fallbacks", self.quotient_fallbacks),
            ("degenerate_links_skipped", self.degenerate_links_skipped),
            ("particle_divergences", self.particle_divergences),
            ("anchor_upgrades", self.anchor_upgrades),
            ("iteration_skips", self.iteration_skips),
        ]
    }
}

fn self_rows_mut(c: &mut Counters) -> Vec<(&'static str, &mut u64)> {
    vec![
        ("belief_updates", &mut c.belief_updates),
        ("spatial_messages", &mut c.spatial_messages),
        ("range_evals", &mut c.range_evals),
        ("agent_broadcasts", &mut c.agent_broadcasts),
        ("agent_broadcast_scalars", &mut c.agent_broadcast_scalars),
        ("dirac_broadcasts", &mut c.dirac_broadcasts),
        ("dirac_broadcast_scalars", &mut c.dirac_broadcast_scalars),
        ("links_generated", &mut c.links_generated),
        ("nlos_links_generated", &mut c.nlos_links_generated),
        ("nlos_links_discarded", &mut c.nlos_links_discarded),
        ("pseudo_anchor_links_pruned", &mut c.pseudo_anchor_links_pruned),
        ("quotient_fallbacks", &mut c.quotient_fallbacks),
        ("degenerate_links_skipped", &mut c.degenerate_links_skipped),
        ("particle_divergences", &mut c.particle_divergences),
        ("anchor_upgrades", &mut c.anchor_upgrades),
        ("iteration_skips", &mut c.iteration_skips),
    ]
}

/// One directed measured link for the current slot, plus the class assigned
/// by NLOS identification (before the iteration loop).
#[derive(Debug, Clone, Copy)]
pub struct Link {
    pub measurement: RangeMeasurement,
    pub classified: Option<LinkClass>,
}

impl Link {
    pub fn from(&self) -> NodeId {
        self.measurement.from
    }

    pub fn to(&self) -> NodeId {
        self.measurement.to
    }
}

pub type LinkSet = Vec<Link>;

/// The wireless network at a point in time. Node ids are indices into
/// `nodes`.
#[derive(Debug, Clone)]
pub struct Network {
    pub nodes: Vec<NodeState>,
    pub comm_range: f64,
    pub slot: usize,
}

impl Network {
    pub fn new(nodes: Vec<NodeState>, comm_range: f64) -> Self {
        debug_assert!(nodes.iter().enumerate().all(|(i, n)| n.id.0 == i));
        Self {
            nodes,
            comm_range,
            slot: 0,
        }
    }

    pub fn node(&self, id: NodeId) -> &NodeState {
        &self.nodes[id.0]
    }

    pub fn agent_ids(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.is_agent())
            .map(|n| n.id)
            .collect()
    }
}

/// Nodes within communication range (closed ball, true positions) of node
/// `i`, split into (anchors, agents); excludes `i` itself.
pub fn discover_neighbors(net: &Network, i: NodeId) -> (Vec<NodeId>, Vec<NodeId>) {
    let me = net.node(i);
    let mut anchors = Vec::new();
    let mut agents = Vec::new();
    for other in &net.nodes {
        if other.id == i {
            continue;
        }
        if true_range(me.true_position, other.true_position) <= net.comm_range {
            match other.kind {
                NodeKind::Anchor => anchors.push(other.id),
                NodeKind::Agent => agents.push(other.id),
            }
        }
    }
    (anchors, agents)
}

/// Classifies every link against the scene using the given position
/// estimates (or the ground-truth labels in oracle mode) and removes the
/// NLOS-classified links.
pub fn classify_and_filter(
    links: LinkSet,
    index: &SceneIndex,
    estimates: &[Position3],
    oracle_mode: bool,
    counters: &mut Counters,
) -> LinkSet {
    let mut kept = Vec::with_capacity(links.len());
    for mut link in links {
        let class = if oracle_mode {
            link.measurement.true_class
        } else {
            classify_link(
                index,
                estimates[link.from().0],
                estimates[link.to().0],
            )
        };
        link.classified = Some(class);
        if class == LinkClass::Los {
            kept.push(link);
        } else {
            counters.nlos_links_discarded += 1;
        }
    }
    kept
}

/// Removes links between two pseudo-anchors and links between a pseudo-anchor
/// and an anchor. Links from a pseudo-anchor to a still-active agent are kept
/// (the pseudo-anchor keeps serving as a reference).
pub fn prune_pseudo_anchor_links(
    links: LinkSet,
    eau: &EauState,
    net: &Network,
    counters: &mut Counters,
) -> LinkSet {
    let mut kept = Vec::with_capacity(links.len());
    for link in links {
        let from_fixed =
            net.node(link.from()).kind == NodeKind::Anchor || eau.is_pseudo(link.from());
        let to_pseudo = eau.is_pseudo(link.to());
        if to_pseudo && from_fixed {
            counters.pseudo_anchor_links_pruned += 1;
        } else {
            kept.push(link);
        }
    }
    kept
}

/// The belief summary a node broadcasts each iteration: per-coordinate mean
/// always; per-coordinate variance only for agents that are still uncertain.
/// Anchors and pseudo-anchors broadcast exact means (3 scalars), active
/// agents broadcast mean and variance (6 scalars).
#[derive(Debug, Clone, Copy)]
pub struct BeliefBroadcast {
    pub source: NodeId,
    pub kind: NodeKind,
    pub mean: Position3,
    pub variance: Option<[f64; 3]>,
}

impl BeliefBroadcast {
    pub fn scalar_count(&self) -> u64 {
        if self.variance.is_some() {
            6
        } else {
            3
        }
    }
}

/// Serializes a node's current belief for broadcast under its current status.
pub fn broadcast(node: &NodeState, status: AgentStatus) -> BeliefBroadcast {
    let exact = node.kind == NodeKind::Anchor || status == AgentStatus::PseudoAnchor;
    BeliefBroadcast {
        source: node.id,
        kind: node.kind,
        mean: node.belief.mean(),
        variance: if exact {
            None
        } else {
            Some(node.belief.variances())
        },
    }
}

/// Per-iteration snapshot for tracing (acceptance checks and debugging).
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub beliefs: Vec<(NodeId, Belief3)>,
    pub statuses: Vec<(NodeId, AgentStatus)>,
}

#[derive(Debug, Clone, Default)]
pub struct SlotTrace {
    pub iterations: Vec<IterationTrace>,
}

/// What a slot produces per agent.
#[derive(Debug, Clone)]
pub struct SlotOutcome {
    /// Final MMSE estimates, one entry per agent.
    pub estimates: Vec<(NodeId, Position3)>,
    /// Pre-iteration (temporal prediction) means, one entry per agent.
    pub temporal_means: Vec<(NodeId, Position3)>,
}

/// Everything the simulator needs to run a slot, minus the network itself.
#[derive(Debug, Clone)]
pub struct SimParams {
    pub l_max: usize,
    pub noise_std: f64,
    pub nlos: NlosParams,
    pub mobility: MobilityParams,
    pub sut: SutParams,
    pub eau: EauParams,
    pub algorithm: Algorithm,
    pub oracle_nlos: bool,
    /// Geographic NLOS filtering on/off (resolved from the algorithm unless
    /// overridden).
    pub gie: bool,
    pub n_particles: usize,
    /// Fraction of the previous belief retained per iteration (natural
    /// parameters), in `[0, 1)`. Under-relaxation of the synchronous
    /// schedule: keeps the fixed points but suppresses the mean oscillation
    /// that dense agent-agent coupling otherwise excites.
    pub damping: f64,
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.noise_std.is_nan() || self.noise_std <= 0.0 {
            return Err(SimError::NonPositiveNoise(self.noise_std));
        }
        self.eau.validate()?;
        self.sut.validate()?;
        if self.nlos.bias_std.is_nan() || self.nlos.bias_std < 0.0 {
            return Err(SimError::NegativeBiasStd(self.nlos.bias_std));
        }
        let mob = &self.mobility;
        if mob.step_std.is_nan()
            || mob.odometry_std.is_nan()
            || mob.step_std < 0.0
            || mob.odometry_std < 0.0
        {
            return Err(SimError::NegativeMobilityStd);
        }
        if self.algorithm.is_spawn() {
            if self.oracle_nlos {
                return Err(SimError::SpawnWithOracle);
            }
            if self.gie {
                return Err(SimError::SpawnWithGie);
            }
            if self.n_particles < 100 {
                return Err(SimError::TooFewParticles(self.n_particles));
            }
        }
        if self.damping.is_nan() || !(0.0..1.0).contains(&self.damping) {
            return Err(SimError::InvalidDamping(self.damping));
        }
        Ok(())
    }
}

/// Random substreams for one (run, slot) pair; every purpose and id gets its
/// own stream so draws are independent of evaluation order.
pub struct SlotStream {
    pub master: u64,
    pub run: u64,
    pub slot: u64,
}

impl SlotStream {
    fn rng(&self, purpose: u64, tags: &[u64]) -> ChaCha12Rng {
        let mut path = vec![self.run, self.slot, purpose];
        path.extend_from_slice(tags);
        substream(self.master, &path)
    }

    pub fn mobility(&self, agent: NodeId) -> ChaCha12Rng {
        self.rng(stream::MOBILITY, &[agent.0 as u64])
    }

    pub fn internal(&self, agent: NodeId) -> ChaCha12Rng {
        self.rng(stream::INTERNAL, &[agent.0 as u64])
    }

    pub fn ranging(&self, from: NodeId, to: NodeId) -> ChaCha12Rng {
        self.rng(stream::RANGING, &[from.0 as u64, to.0 as u64])
    }

    pub fn spawn_init(&self, agent: NodeId) -> ChaCha12Rng {
        self.rng(stream::SPAWN_INIT, &[agent.0 as u64])
    }

    pub fn spawn_update(&self, agent: NodeId, iteration: u64) -> ChaCha12Rng {
        self.rng(stream::SPAWN_UPDATE, &[agent.0 as u64, iteration])
    }
}

/// Drives a network through time slots under one algorithm and parameter set.
pub struct Simulator<'a> {
    pub net: Network,
    index: &'a SceneIndex,
    bounds: Box3,
    params: SimParams,
    master_seed: u64,
    run: u64,
    pub counters: Counters,
    /// Particle clouds per node id (agents only), SPAWN runs.
    clouds: Vec<Option<ParticleBelief>>,
}

impl<'a> Simulator<'a> {
    pub fn new(
        net: Network,
        index: &'a SceneIndex,
        bounds: Box3,
        params: SimParams,
        master_seed: u64,
        run: u64,
    ) -> Result<Self, SimError> {
        params.validate()?;
        if net.comm_range.is_nan() || net.comm_range <= 0.0 {
            return Err(SimError::NonPositiveCommRange(net.comm_range));
        }
        let n = net.nodes.len();
        Ok(Self {
            net,
            index,
            bounds,
            params,
            master_seed,
            run,
            counters: Counters::default(),
            clouds: vec![None; n],
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    /// Advances the simulation by one time slot.
    pub fn run_time_slot(&mut self) -> Result<SlotOutcome, SimError> {
        self.run_slot_inner(None)
    }

    /// Like [`Self::run_time_slot`] but records per-iteration beliefs and
    /// statuses.
    pub fn run_time_slot_traced(&mut self, trace: &mut SlotTrace) -> Result<SlotOutcome, SimError> {
        self.run_slot_inner(Some(trace))
    }

    fn run_slot_inner(&mut self, mut trace: Option<&mut SlotTrace>) -> Result<SlotOutcome, SimError> {
        let slot = self.net.slot;
        let streams = SlotStream {
            master: self.master_seed,
            run: self.run,
            slot: slot as u64,
        };
        let n_nodes = self.net.nodes.len();
        let agent_ids = self.net.agent_ids();

        // Ground-truth motion and internal measurements (slot 0 starts from
        // the initial placement and the prior).
        let mut internal = vec![[0.0; 3]; n_nodes];
        if slot > 0 {
            for &id in &agent_ids {
                let node = &mut self.net.nodes[id.0];
                let prev = node.true_position;
                let mut rng = streams.mobility(id);
                let next = mobility_step(prev, &self.params.mobility, &self.bounds, &mut rng);
                node.true_position = next;
                node.trajectory.push(next);
                let mut rng = streams.internal(id);
                internal[id.0] = generate_internal_measurement(
                    prev,
                    next,
                    self.params.mobility.odometry_std,
                    &mut rng,
                );
            }
        }

        // External measurements, LOS/NLOS decided from true geometry.
        let mut links = self.collect_measurements(&streams, slot);

        // Temporal messages, fixed for the slot's iterations.
        let mut temporal: Vec<Option<TemporalMessage>> = vec![None; n_nodes];
        for &id in &agent_ids {
            let node = &self.net.nodes[id.0];
            let message = if slot == 0 {
                TemporalMessage::from_prior(&node.belief)
            } else {
                temporal_prediction(&node.belief, internal[id.0], &self.params.mobility)
            };
            temporal[id.0] = Some(message);
        }

        // SPAWN clouds: initialize from the prior or propagate by the
        // internal displacement plus process noise.
        let mut temporal_clouds: Vec<Option<ParticleBelief>> = vec![None; n_nodes];
        if self.params.algorithm.is_spawn() {
            let step_var = self.params.mobility.step_std.powi(2) / 3.0
                + self.params.mobility.odometry_std.powi(2);
            let per_coord_std = step_var.sqrt();
            for &id in &agent_ids {
                let mut rng = streams.spawn_init(id);
                let cloud = match self.clouds[id.0].take() {
                    Some(mut cloud) if slot > 0 => {
                        cloud.propagate(internal[id.0], per_coord_std, &mut rng);
                        cloud
                    }
                    _ => ParticleBelief::from_gaussian(
                        &self.net.nodes[id.0].belief,
                        self.params.n_particles,
                        &mut rng,
                    ),
                };
                temporal_clouds[id.0] = Some(cloud.clone());
                self.clouds[id.0] = Some(cloud);
            }
        }

        // Initialize beliefs from the temporal information.
        for &id in &agent_ids {
            if self.params.algorithm.is_spawn() {
                let cloud = self.clouds[id.0].as_ref().expect("cloud initialized");
                self.net.nodes[id.0].belief = summarize_cloud(cloud);
            } else {
                let message = temporal[id.0].expect("agent temporal message");
                self.net.nodes[id.0].belief = Belief3::from_coords(message.coords);
            }
        }

        let temporal_means: Vec<(NodeId, Position3)> = agent_ids
            .iter()
            .map(|&id| (id, self.net.nodes[id.0].belief.mean()))
            .collect();

        // Estimate-based NLOS identification, once per slot before the loop.
        if self.params.gie || self.params.oracle_nlos {
            let estimates: Vec<Position3> = self
                .net
                .nodes
                .iter()
                .map(|n| match n.kind {
                    NodeKind::Anchor => n.true_position,
                    NodeKind::Agent => n.belief.mean(),
                })
                .collect();
            links = classify_and_filter(
                links,
                self.index,
                &estimates,
                self.params.oracle_nlos,
                &mut self.counters,
            );
        }

        let mut eau = EauState::new(n_nodes);
        eau.reset_for_slot();
        for &(id, mean) in &temporal_means {
            eau.set_prev_mean(id, mean);
        }

        for l in 1..=self.params.l_max {
            if self.params.algorithm.is_spawn() {
                self.run_iteration_spawn(&links, &streams, l as u64, &temporal_clouds)?;
            } else {
                self.run_iteration(&mut links, &mut eau, &temporal, l)?;
            }
            if let Some(t) = trace.as_deref_mut() {
                t.iterations.push(IterationTrace {
                    beliefs: agent_ids
                        .iter()
                        .map(|&id| (id, self.net.nodes[id.0].belief))
                        .collect(),
                    statuses: agent_ids.iter().map(|&id| (id, eau.status(id))).collect(),
                });
            }
        }

        let estimates = agent_ids
            .iter()
            .map(|&id| {
                let node = &self.net.nodes[id.0];
                let estimate = if self.params.algorithm.is_spawn() {
                    particle_mmse(self.clouds[id.0].as_ref().expect("cloud"))
                } else {
                    mmse_estimate(&node.belief)
                };
                (id, estimate)
            })
            .collect();

        self.net.slot += 1;
        Ok(SlotOutcome {
            estimates,
            temporal_means,
        })
    }

    fn collect_measurements(&mut self, streams: &SlotStream, slot: usize) -> LinkSet {
        let mut links = Vec::new();
        for to in self.net.agent_ids() {
            let (anchors, agents) = discover_neighbors(&self.net, to);
            for from in anchors.into_iter().chain(agents) {
                let class = classify_link(
                    self.index,
                    self.net.node(to).true_position,
                    self.net.node(from).true_position,
                );
                let mut rng = streams.ranging(from, to);
                let measurement = generate_ranging_measurement(
                    self.net.node(to),
                    self.net.node(from),
                    slot,
                    class,
                    self.params.noise_std,
                    &self.params.nlos,
                    &mut rng,
                );
                self.counters.links_generated += 1;
                if class == LinkClass::Nlos {
                    self.counters.nlos_links_generated += 1;
                }
                links.push(Link {
                    measurement,
                    classified: None,
                });
            }
        }
        links
    }

    /// One synchronous message-passing iteration: broadcast the previous
    /// beliefs, update every active agent against that snapshot, then apply
    /// the anchor-upgrading transitions.
    pub fn run_iteration(
        &mut self,
        links: &mut LinkSet,
        eau: &mut EauState,
        temporal: &[Option<TemporalMessage>],
        _l: usize,
    ) -> Result<(), SimError> {
        let agent_ids = self.net.agent_ids();
        let snapshot = self.broadcast_phase(eau);
        let order: Vec<NodeId> = agent_ids.clone();
        let updates = self.compute_updates(&order, links, eau, temporal, &snapshot)?;

        let mut upgraded_any = false;
        for (id, belief) in updates {
            self.net.nodes[id.0].belief = belief;
            let new_mean = belief.mean();
            if self.params.eau.enabled {
                let prev = eau.prev_means[id.0].expect("previous mean recorded");
                match eau_classify(prev, new_mean, &self.params.eau) {
                    EauDecision::Upgrade => {
                        eau.statuses[id.0] = AgentStatus::PseudoAnchor;
                        self.counters.anchor_upgrades += 1;
                        upgraded_any = true;
                    }
                    EauDecision::SkipNext => eau.statuses[id.0] = AgentStatus::SkipNext,
                    EauDecision::Continue => eau.statuses[id.0] = AgentStatus::Active,
                }
            }
            eau.prev_means[id.0] = Some(new_mean);
        }
        if upgraded_any {
            let current = std::mem::take(links);
            *links = prune_pseudo_anchor_links(current, eau, &self.net, &mut self.counters);
        }
        Ok(())
    }

    /// Broadcast snapshot of every node's belief; counts scalars.
    fn broadcast_phase(&mut self, eau: &EauState) -> Vec<BeliefBroadcast> {
        let mut snapshot = Vec::with_capacity(self.net.nodes.len());
        for node in &self.net.nodes {
            let b = broadcast(node, eau.status(node.id));
            match b.variance {
                Some(_) => {
                    self.counters.agent_broadcasts += 1;
                    self.counters.agent_broadcast_scalars += b.scalar_count();
                }
                None => {
                    self.counters.dirac_broadcasts += 1;
                    self.counters.dirac_broadcast_scalars += b.scalar_count();
                }
            }
            snapshot.push(b);
        }
        snapshot
    }

    /// Computes the new beliefs of all updatable agents, in the given order,
    /// reading only the broadcast snapshot. Skip flags are consumed here.
    fn compute_updates(
        &mut self,
        order: &[NodeId],
        links: &LinkSet,
        eau: &mut EauState,
        temporal: &[Option<TemporalMessage>],
        snapshot: &[BeliefBroadcast],
    ) -> Result<Vec<(NodeId, Belief3)>, SimError> {
        let mut updates = Vec::with_capacity(order.len());
        for &id in order {
            match eau.status(id) {
                AgentStatus::PseudoAnchor => continue,
                AgentStatus::SkipNext => {
                    eau.statuses[id.0] = AgentStatus::Active;
                    self.counters.iteration_skips += 1;
                    continue;
                }
                AgentStatus::Active => {}
            }
            let belief = self.net.nodes[id.0].belief;
            let mut messages: Vec<SpatialMessage> = Vec::new();
            for link in links.iter().filter(|l| l.to() == id) {
                let neighbor = &snapshot[link.from().0];
                let z = link.measurement.z;
                let sigma = link.measurement.noise_std;
                match self.params.algorithm.sut_mode() {
                    Some(mode) => {
                        let out = sut_spatial_message(
                            &belief,
                            neighbor.mean,
                            neighbor.variance,
                            z,
                            sigma,
                            &self.params.sut,
                            mode,
                            neighbor.source,
                            neighbor.kind,
                        )?;
                        self.counters.quotient_fallbacks += u64::from(out.quotient_fallbacks);
                        self.counters.range_evals += u64::from(out.range_evals);
                        self.counters.spatial_messages += 1;
                        let message = match (mode, neighbor.variance) {
                            (MessageMode::Literal, Some(vars)) => moderate_agent_message(
                                &out.message,
                                &Belief3::gaussian(neighbor.mean, vars),
                                MessageMode::Literal,
                            ),
                            _ => out.message,
                        };
                        messages.push(message);
                    }
                    None => {
                        // First-order Taylor baseline.
                        match spa_te_spatial_message(
                            &belief,
                            neighbor.mean,
                            z,
                            sigma,
                            neighbor.source,
                            neighbor.kind,
                        ) {
                            Some(msg) => {
                                self.counters.range_evals += 1;
                                self.counters.spatial_messages += 1;
                                let msg = match neighbor.variance {
                                    Some(vars) => moderate_agent_message(
                                        &msg,
                                        &Belief3::gaussian(neighbor.mean, vars),
                                        MessageMode::Default,
                                    ),
                                    None => msg,
                                };
                                messages.push(msg);
                            }
                            None => self.counters.degenerate_links_skipped += 1,
                        }
                    }
                }
            }
            let message = temporal[id.0].expect("agent temporal message");
            let fused = fuse_belief(&message, &messages);
            let next = if messages.is_empty() || self.params.damping == 0.0 {
                fused
            } else {
                damp_belief(&belief, &fused, self.params.damping)
            };
            updates.push((id, next));
            self.counters.belief_updates += 1;
        }
        Ok(updates)
    }

    fn run_iteration_spawn(
        &mut self,
        links: &LinkSet,
        streams: &SlotStream,
        iteration: u64,
        temporal_clouds: &[Option<ParticleBelief>],
    ) -> Result<(), SimError> {
        // Snapshot broadcasts from the summarized beliefs.
        let eau = EauState::new(self.net.nodes.len());
        let snapshot = self.broadcast_phase(&eau);
        let agent_ids = self.net.agent_ids();
        for &id in &agent_ids {
            let observations: Vec<RangeObservation> = links
                .iter()
                .filter(|l| l.to() == id)
                .map(|l| RangeObservation {
                    reference: snapshot[l.from().0].mean,
                    z: l.measurement.z,
                    noise_std: l.measurement.noise_std,
                })
                .collect();
            let cloud = self.clouds[id.0].as_mut().expect("cloud");
            let mut rng = streams.spawn_update(id, iteration);
            let n_obs = observations.len() as u64;
            let outcome = spawn_particle_update(cloud, &observations, &mut rng);
            self.counters.spatial_messages += n_obs;
            self.counters.range_evals += n_obs * cloud.len() as u64;
            self.counters.belief_updates += 1;
            if outcome.diverged {
                *cloud = temporal_clouds[id.0]
                    .as_ref()
                    .expect("temporal cloud")
                    .clone();
                self.counters.particle_divergences += 1;
            }
            self.net.nodes[id.0].belief = summarize_cloud(self.clouds[id.0].as_ref().unwrap());
        }
        Ok(())
    }
}

/// Convex combination of old and proposed beliefs in natural parameters
/// (precision and precision-weighted mean). `keep_old = 0` is the undamped
/// update; any fixed point of the undamped iteration is preserved.
fn damp_belief(old: &Belief3, proposed: &Belief3, keep_old: f64) -> Belief3 {
    let fresh = 1.0 - keep_old;
    let mut coords = [Gaussian1::new(0.0, 1.0); 3];
    for c in 0..3 {
        let o = old.coord(c);
        let p = proposed.coord(c);
        let precision = fresh * p.precision() + keep_old * o.precision();
        let linear = fresh * p.mean * p.precision() + keep_old * o.mean * o.precision();
        let variance = 1.0 / precision;
        coords[c] = Gaussian1::new(linear * variance, variance);
    }
    Belief3::from_coords(coords)
}

/// Gaussian summary of a particle cloud for broadcasting; variances floored
/// to keep the summary a proper Gaussian.
fn summarize_cloud(cloud: &ParticleBelief) -> Belief3 {
    let mean = cloud.weighted_mean();
    let mut vars = cloud.weighted_variance();
    for v in &mut vars {
        *v = v.max(1e-9);
    }
    Belief3::gaussian(mean, vars)
}
