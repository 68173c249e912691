//! Core domain types and generative models.
//!
//! Positions, per-coordinate Gaussians, node state, and the measurement
//! models: ranging (`z = d + e + N` with an additive NLOS bias), odometry-style
//! internal displacement observations, and random-direction agent mobility.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::scene::Box3;

/// A 3D position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn coord(self, axis: usize) -> f64 {
        self.to_array()[axis]
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

impl std::ops::Add for Position3 {
    type Output = Position3;
    fn add(self, rhs: Position3) -> Position3 {
        Position3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Position3 {
    type Output = Position3;
    fn sub(self, rhs: Position3) -> Position3 {
        Position3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Mul<f64> for Position3 {
    type Output = Position3;
    fn mul(self, s: f64) -> Position3 {
        Position3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Line-of-sight class of a ranging link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LinkClass {
    Los,
    Nlos,
}

/// A one-dimensional Gaussian (mean in meters, variance in meters²).
///
/// Variance must be positive everywhere a `Gaussian1` participates in
/// precision arithmetic; exact (variance-zero) anchor knowledge is carried by
/// the Dirac flag on [`Belief3`], never by a zero here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1 {
    pub mean: f64,
    pub variance: f64,
}

impl Gaussian1 {
    pub fn new(mean: f64, variance: f64) -> Self {
        Self { mean, variance }
    }

    pub fn precision(&self) -> f64 {
        1.0 / self.variance
    }

    /// Precision-weighted product of two Gaussians (unnormalized density
    /// product, renormalized).
    pub fn product(&self, other: &Gaussian1) -> Gaussian1 {
        let precision = self.precision() + other.precision();
        let variance = 1.0 / precision;
        let mean = variance * (self.mean * self.precision() + other.mean * other.precision());
        Gaussian1::new(mean, variance)
    }

    /// Gaussian quotient `self / other`. Returns `None` when the result would
    /// not be a proper Gaussian (non-positive precision difference).
    pub fn quotient(&self, other: &Gaussian1) -> Option<Gaussian1> {
        let precision = self.precision() - other.precision();
        if precision <= 0.0 || !precision.is_finite() {
            return None;
        }
        let variance = 1.0 / precision;
        let mean = variance * (self.mean * self.precision() - other.mean * other.precision());
        Some(Gaussian1::new(mean, variance))
    }
}

/// A coordinate-factorized 3D Gaussian belief (diagonal covariance), with a
/// Dirac flag for exactly known positions (anchor broadcasts).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Belief3 {
    coords: [Gaussian1; 3],
    dirac: bool,
}

impl Belief3 {
    /// A proper Gaussian belief; all variances must be positive.
    pub fn gaussian(mean: Position3, variances: [f64; 3]) -> Self {
        debug_assert!(variances.iter().all(|&v| v > 0.0));
        let m = mean.to_array();
        Self {
            coords: [
                Gaussian1::new(m[0], variances[0]),
                Gaussian1::new(m[1], variances[1]),
                Gaussian1::new(m[2], variances[2]),
            ],
            dirac: false,
        }
    }

    /// An isotropic Gaussian belief.
    pub fn isotropic(mean: Position3, variance: f64) -> Self {
        Self::gaussian(mean, [variance; 3])
    }

    /// Exact knowledge (variance zero); only anchors and pseudo-anchors carry
    /// this.
    pub fn dirac(position: Position3) -> Self {
        let m = position.to_array();
        Self {
            coords: [
                Gaussian1::new(m[0], 0.0),
                Gaussian1::new(m[1], 0.0),
                Gaussian1::new(m[2], 0.0),
            ],
            dirac: true,
        }
    }

    pub fn from_coords(coords: [Gaussian1; 3]) -> Self {
        debug_assert!(coords.iter().all(|g| g.variance > 0.0));
        Self {
            coords,
            dirac: false,
        }
    }

    pub fn is_dirac(&self) -> bool {
        self.dirac
    }

    pub fn coords(&self) -> &[Gaussian1; 3] {
        &self.coords
    }

    pub fn coord(&self, axis: usize) -> Gaussian1 {
        self.coords[axis]
    }

    pub fn mean(&self) -> Position3 {
        Position3::new(self.coords[0].mean, self.coords[1].mean, self.coords[2].mean)
    }

    pub fn variances(&self) -> [f64; 3] {
        [
            self.coords[0].variance,
            self.coords[1].variance,
            self.coords[2].variance,
        ]
    }
}

/// Node identifier; indexes into the network's node list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Anchor,
    Agent,
}

/// Per-node simulation state. Pseudo-anchor is a per-slot status tracked by
/// the EAU state machine, not a node kind.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub kind: NodeKind,
    pub true_position: Position3,
    pub belief: Belief3,
    /// True positions over past slots, most recent last.
    pub trajectory: Vec<Position3>,
}

impl NodeState {
    pub fn anchor(id: NodeId, position: Position3) -> Self {
        Self {
            id,
            kind: NodeKind::Anchor,
            true_position: position,
            belief: Belief3::dirac(position),
            trajectory: vec![position],
        }
    }

    pub fn agent(id: NodeId, position: Position3, prior: Belief3) -> Self {
        Self {
            id,
            kind: NodeKind::Agent,
            true_position: position,
            belief: prior,
            trajectory: vec![position],
        }
    }

    pub fn is_agent(&self) -> bool {
        self.kind == NodeKind::Agent
    }
}

/// NLOS bias model: the additive component is `N(bias_mean, bias_std²)` on
/// NLOS links and zero on LOS links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlosParams {
    pub bias_mean: f64,
    pub bias_std: f64,
}

impl Default for NlosParams {
    fn default() -> Self {
        Self {
            bias_mean: 20.0,
            bias_std: 5.0,
        }
    }
}

/// Agent mobility and internal (odometry) measurement noise.
///
/// Each slot an agent moves `d · u` with `d ~ N(0, step_std²)` and `u` uniform
/// on the unit sphere; the internal measurement observes the displacement with
/// per-coordinate noise `N(0, odometry_std²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityParams {
    pub step_std: f64,
    pub odometry_std: f64,
}

impl Default for MobilityParams {
    fn default() -> Self {
        Self {
            step_std: 1.0,
            odometry_std: 0.1,
        }
    }
}

/// One noisy ranging observation `z_{from→to}` together with its metadata and
/// the ground-truth link class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeMeasurement {
    pub from: NodeId,
    pub to: NodeId,
    pub slot: usize,
    /// Observed range, meters; clamped to be nonnegative.
    pub z: f64,
    /// Measurement noise standard deviation used by the likelihood.
    pub noise_std: f64,
    pub true_class: LinkClass,
}

/// All measurements collected in one time slot: external ranging observations
/// plus per-agent internal displacement observations (indexed by node id).
#[derive(Debug, Clone, Default)]
pub struct SlotMeasurements {
    pub external: Vec<RangeMeasurement>,
    pub internal: Vec<(NodeId, [f64; 3])>,
}

fn sample_normal(rng: &mut impl Rng, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        // Deterministic test mode: the draw collapses to its mean.
        mean
    } else {
        let g: f64 = StandardNormal.sample(rng);
        mean + std * g
    }
}

/// Euclidean distance between two positions.
pub fn true_range(a: Position3, b: Position3) -> f64 {
    (a - b).norm()
}

/// Generates one ranging measurement `z = d + e + N` for the directed link
/// `from → to`: `e ~ N(0, noise_std²)`, and `N` is zero on LOS links and
/// `N(bias_mean, bias_std²)` on NLOS links. Negative draws are clamped to 0.
///
/// Passing zero standard deviations forces the corresponding draw to its
/// mean (deterministic test mode).
pub fn generate_ranging_measurement(
    to: &NodeState,
    from: &NodeState,
    slot: usize,
    class: LinkClass,
    noise_std: f64,
    nlos: &NlosParams,
    rng: &mut impl Rng,
) -> RangeMeasurement {
    let d = true_range(to.true_position, from.true_position);
    let e = sample_normal(rng, 0.0, noise_std);
    let bias = match class {
        LinkClass::Los => 0.0,
        LinkClass::Nlos => sample_normal(rng, nlos.bias_mean, nlos.bias_std),
    };
    RangeMeasurement {
        from: from.id,
        to: to.id,
        slot,
        z: (d + e + bias).max(0.0),
        noise_std,
        true_class: class,
    }
}

/// Moves an agent one slot: `new = old + d · u` with `d ~ N(0, step_std²)` and
/// `u` uniform on the unit sphere, clamped into `bounds`.
pub fn mobility_step(
    position: Position3,
    params: &MobilityParams,
    bounds: &Box3,
    rng: &mut impl Rng,
) -> Position3 {
    if params.step_std == 0.0 {
        return position;
    }
    let d = sample_normal(rng, 0.0, params.step_std);
    let u: [f64; 3] = UnitSphere.sample(rng);
    bounds.clamp(position + Position3::from_array(u) * d)
}

/// Observes the displacement `curr − prev` with additive per-coordinate noise
/// `N(0, odometry_std²)`.
pub fn generate_internal_measurement(
    prev: Position3,
    curr: Position3,
    odometry_std: f64,
    rng: &mut impl Rng,
) -> [f64; 3] {
    let d = curr - prev;
    [
        sample_normal(rng, d.x, odometry_std),
        sample_normal(rng, d.y, odometry_std),
        sample_normal(rng, d.z, odometry_std),
    ]
}

/// The unnormalized ranging likelihood `exp{−(z − ‖x − ref‖)² / (2σ²)}`.
///
/// The Gaussian normalization constant is omitted consistently; messages are
/// renormalized wherever it would matter.
pub fn range_likelihood(z: f64, x: Position3, reference: Position3, sigma: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    let d = true_range(x, reference);
    let r = (z - d) / sigma;
    (-0.5 * r * r).exp()
}

/// Log of [`range_likelihood`]; used where products over many links would
/// underflow.
pub fn range_log_likelihood(z: f64, x: Position3, reference: Position3, sigma: f64) -> f64 {
    let d = true_range(x, reference);
    let r = (z - d) / sigma;
    -0.5 * r * r
}
