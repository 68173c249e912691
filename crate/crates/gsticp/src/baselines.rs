//! Comparison localizers: a first-order-Taylor spatial message (SPA-TE
//! style) and a particle-based localizer (SPAWN style, definitionally run
//! without NLOS-link identification).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::models::{range_log_likelihood, Belief3, Gaussian1, NodeId, NodeKind, Position3};
use crate::sut::SpatialMessage;

/// Baselines with coincident linearization point and reference are skipped.
pub const SPA_TE_MIN_BASELINE: f64 = 1e-6;

/// Floor on the squared direction-cosine used to project measurement noise
/// onto a coordinate; keeps near-orthogonal coordinates finite but
/// uninformative.
const MIN_AXIS_WEIGHT: f64 = 1e-3;

/// First-order Taylor (linearized) range message: `d(x) ≈ d(m) + u·(x − m)`
/// at the belief mean `m`, unit vector `u` pointing from the neighbor to `m`.
/// Returns `None` on a degenerate (coincident) baseline.
pub fn spa_te_spatial_message(
    belief: &Belief3,
    neighbor_mean: Position3,
    z: f64,
    noise_std: f64,
    source: NodeId,
    source_kind: NodeKind,
) -> Option<SpatialMessage> {
    let m = belief.mean();
    let baseline = m - neighbor_mean;
    let dist = baseline.norm();
    if dist <= SPA_TE_MIN_BASELINE {
        return None;
    }
    let u = (baseline * (1.0 / dist)).to_array();
    let innovation = z - dist;
    let noise_var = noise_std * noise_std;
    let mut coords = [Gaussian1::new(0.0, 1.0); 3];
    for c in 0..3 {
        coords[c] = Gaussian1::new(
            m.coord(c) + u[c] * innovation,
            noise_var / (u[c] * u[c]).max(MIN_AXIS_WEIGHT),
        );
    }
    Some(SpatialMessage {
        coords,
        source,
        source_kind,
    })
}

/// A weighted particle cloud approximating an agent's position belief.
#[derive(Debug, Clone)]
pub struct ParticleBelief {
    pub particles: Vec<Position3>,
    pub weights: Vec<f64>,
}

impl ParticleBelief {
    /// Samples `n` particles from a diagonal-Gaussian belief, uniform weights.
    pub fn from_gaussian(belief: &Belief3, n: usize, rng: &mut impl Rng) -> Self {
        let mean = belief.mean().to_array();
        let std: Vec<f64> = belief.variances().iter().map(|v| v.sqrt()).collect();
        let particles = (0..n)
            .map(|_| {
                let mut p = [0.0; 3];
                for c in 0..3 {
                    let g: f64 = StandardNormal.sample(rng);
                    p[c] = mean[c] + std[c] * g;
                }
                Position3::from_array(p)
            })
            .collect();
        Self {
            particles,
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Shifts every particle by `displacement` plus per-coordinate noise.
    pub fn propagate(&mut self, displacement: [f64; 3], per_coord_std: f64, rng: &mut impl Rng) {
        for p in &mut self.particles {
            let mut a = p.to_array();
            for c in 0..3 {
                let noise: f64 = if per_coord_std == 0.0 {
                    0.0
                } else {
                    let g: f64 = StandardNormal.sample(rng);
                    per_coord_std * g
                };
                a[c] += displacement[c] + noise;
            }
            *p = Position3::from_array(a);
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn effective_sample_size(&self) -> f64 {
        let sum_sq: f64 = self.weights.iter().map(|w| w * w).sum();
        if sum_sq > 0.0 {
            1.0 / sum_sq
        } else {
            0.0
        }
    }

    pub fn weighted_mean(&self) -> Position3 {
        let mut acc = Position3::default();
        for (p, &w) in self.particles.iter().zip(&self.weights) {
            acc = acc + *p * w;
        }
        acc
    }

    pub fn weighted_variance(&self) -> [f64; 3] {
        let mean = self.weighted_mean().to_array();
        let mut var = [0.0; 3];
        for (p, &w) in self.particles.iter().zip(&self.weights) {
            let a = p.to_array();
            for c in 0..3 {
                let d = a[c] - mean[c];
                var[c] += w * d * d;
            }
        }
        var
    }
}

/// One ranging factor for a particle update: the neighbor's broadcast mean
/// and the observed range with its noise level.
#[derive(Debug, Clone, Copy)]
pub struct RangeObservation {
    pub reference: Position3,
    pub z: f64,
    pub noise_std: f64,
}

/// Result of one particle update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpawnOutcome {
    /// All importance weights vanished; the caller should reinitialize the
    /// cloud from its temporal prediction.
    pub diverged: bool,
    pub resampled: bool,
}

/// Importance-weights the cloud by the product of ranging likelihoods over
/// all observations (evaluated at neighbor broadcast means), normalizes, and
/// systematically resamples when the effective sample size drops below half
/// the cloud. Weights are accumulated in log space.
pub fn spawn_particle_update(
    belief: &mut ParticleBelief,
    observations: &[RangeObservation],
    rng: &mut impl Rng,
) -> SpawnOutcome {
    let n = belief.len();
    let mut log_w: Vec<f64> = belief.weights.iter().map(|w| w.ln()).collect();
    for (p, lw) in belief.particles.iter().zip(log_w.iter_mut()) {
        for obs in observations {
            *lw += range_log_likelihood(obs.z, *p, obs.reference, obs.noise_std);
        }
    }
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return SpawnOutcome {
            diverged: true,
            resampled: false,
        };
    }
    let mut sum = 0.0;
    for lw in &mut log_w {
        *lw = (*lw - max).exp();
        sum += *lw;
    }
    if sum.is_nan() || sum <= 0.0 || !sum.is_finite() {
        return SpawnOutcome {
            diverged: true,
            resampled: false,
        };
    }
    for (w, lw) in belief.weights.iter_mut().zip(&log_w) {
        *w = lw / sum;
    }
    let mut resampled = false;
    if belief.effective_sample_size() < n as f64 / 2.0 {
        systematic_resample(belief, rng);
        resampled = true;
    }
    SpawnOutcome {
        diverged: false,
        resampled,
    }
}

/// Systematic resampling: one uniform offset, `n` evenly spaced pointers.
pub fn systematic_resample(belief: &mut ParticleBelief, rng: &mut impl Rng) {
    let n = belief.len();
    let step = 1.0 / n as f64;
    let mut pointer = rng.gen::<f64>() * step;
    let mut cumulative = belief.weights[0];
    let mut index = 0usize;
    let mut picked = Vec::with_capacity(n);
    for _ in 0..n {
        while pointer > cumulative && index + 1 < n {
            index += 1;
            cumulative += belief.weights[index];
        }
        picked.push(belief.particles[index]);
        pointer += step;
    }
    belief.particles = picked;
    belief.weights = vec![step; n];
}

/// Weighted particle mean (the particle analogue of the MMSE estimate).
pub fn particle_mmse(belief: &ParticleBelief) -> Position3 {
    belief.weighted_mean()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn spa_te_zero_innovation_keeps_mean() {
        let belief = Belief3::isotropic(Position3::new(1.0, 2.0, 3.0), 4.0);
        let neighbor = Position3::new(11.0, 2.0, 3.0);
        let d = (belief.mean() - neighbor).norm();
        let m = spa_te_spatial_message(&belief, neighbor, d, 1.0, NodeId(0), NodeKind::Anchor)
            .unwrap();
        for c in 0..3 {
            assert_eq!(m.coords[c].mean, belief.mean().coord(c));
        }
    }

    #[test]
    fn spa_te_axis_aligned_projection() {
        let belief = Belief3::isotropic(Position3::default(), 1.0);
        let neighbor = Position3::new(-10.0, 0.0, 0.0);
        let m = spa_te_spatial_message(&belief, neighbor, 12.0, 1.0, NodeId(0), NodeKind::Anchor)
            .unwrap();
        assert!((m.coords[0].mean - 2.0).abs() < 1e-12);
        assert!((m.coords[0].variance - 1.0).abs() < 1e-12);
        for c in 1..3 {
            assert_eq!(m.coords[c].mean, 0.0);
            assert_eq!(m.coords[c].variance, 1.0 / MIN_AXIS_WEIGHT);
        }
    }

    #[test]
    fn spa_te_degenerate_baseline_is_skipped() {
        let p = Position3::new(5.0, 5.0, 5.0);
        let belief = Belief3::isotropic(p, 1.0);
        assert!(spa_te_spatial_message(&belief, p, 1.0, 1.0, NodeId(0), NodeKind::Agent).is_none());
    }

    #[test]
    fn particle_mmse_examples() {
        let one = ParticleBelief {
            particles: vec![Position3::new(1.0, 2.0, 3.0)],
            weights: vec![1.0],
        };
        assert_eq!(particle_mmse(&one), Position3::new(1.0, 2.0, 3.0));

        let two = ParticleBelief {
            particles: vec![Position3::default(), Position3::new(2.0, 0.0, 0.0)],
            weights: vec![0.5, 0.5],
        };
        assert_eq!(particle_mmse(&two), Position3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn particle_mmse_matches_direct_sum() {
        let mut rng = substream(21, &[]);
        let belief = ParticleBelief::from_gaussian(
            &Belief3::isotropic(Position3::new(3.0, -1.0, 2.0), 4.0),
            100,
            &mut rng,
        );
        let mut expect = Position3::default();
        for (p, w) in belief.particles.iter().zip(&belief.weights) {
            expect = expect + *p * *w;
        }
        assert_eq!(particle_mmse(&belief), expect);
    }

    #[test]
    fn constant_likelihood_gives_equal_weights() {
        // Particles on a sphere of radius z around the anchor: every
        // likelihood is identical, so weights stay uniform.
        let anchor = Position3::default();
        let z = 10.0;
        let particles = vec![
            Position3::new(z, 0.0, 0.0),
            Position3::new(-z, 0.0, 0.0),
            Position3::new(0.0, z, 0.0),
            Position3::new(0.0, -z, 0.0),
            Position3::new(0.0, 0.0, z),
            Position3::new(0.0, 0.0, -z),
        ];
        let n = particles.len();
        let mut belief = ParticleBelief {
            particles,
            weights: vec![1.0 / n as f64; n],
        };
        let obs = [RangeObservation {
            reference: anchor,
            z,
            noise_std: 1.0,
        }];
        let mut rng = substream(22, &[]);
        let out = spawn_particle_update(&mut belief, &obs, &mut rng);
        assert!(!out.diverged);
        for w in &belief.weights {
            assert!((w - 1.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn two_particle_weight_ratio() {
        // Likelihoods (1, 1/4) normalize to (0.8, 0.2).
        let anchor = Position3::default();
        let z = 10.0;
        let off = (2.0 * 4.0f64.ln()).sqrt();
        let mut belief = ParticleBelief {
            particles: vec![
                Position3::new(z, 0.0, 0.0),
                Position3::new(z - off, 0.0, 0.0),
            ],
            weights: vec![0.5, 0.5],
        };
        let obs = [RangeObservation {
            reference: anchor,
            z,
            noise_std: 1.0,
        }];
        let mut rng = substream(23, &[]);
        spawn_particle_update(&mut belief, &obs, &mut rng);
        assert!((belief.weights[0] - 0.8).abs() < 1e-12);
        assert!((belief.weights[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn weights_stay_normalized() {
        let mut rng = substream(24, &[]);
        let mut belief = ParticleBelief::from_gaussian(
            &Belief3::isotropic(Position3::default(), 25.0),
            500,
            &mut rng,
        );
        let obs = [
            RangeObservation {
                reference: Position3::new(20.0, 0.0, 0.0),
                z: 20.0,
                noise_std: 2.0,
            },
            RangeObservation {
                reference: Position3::new(0.0, 20.0, 0.0),
                z: 20.0,
                noise_std: 2.0,
            },
        ];
        for _ in 0..5 {
            let out = spawn_particle_update(&mut belief, &obs, &mut rng);
            assert!(!out.diverged);
            let sum: f64 = belief.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn impossible_observation_diverges() {
        let mut rng = substream(25, &[]);
        let mut belief = ParticleBelief::from_gaussian(
            &Belief3::isotropic(Position3::default(), 1.0),
            50,
            &mut rng,
        );
        let obs = [RangeObservation {
            reference: Position3::default(),
            z: 1e200,
            noise_std: 1.0,
        }];
        let out = spawn_particle_update(&mut belief, &obs, &mut rng);
        assert!(out.diverged);
    }

    #[test]
    fn zero_noise_four_anchor_consistency() {
        // Exact ranges from four anchors, weighting sigma 1: the weighted
        // mean lands near the true position.
        let truth = Position3::new(12.0, -7.0, 4.0);
        let anchors = [
            Position3::new(50.0, 0.0, 0.0),
            Position3::new(-50.0, 10.0, 0.0),
            Position3::new(0.0, 60.0, 20.0),
            Position3::new(5.0, -40.0, -30.0),
        ];
        let obs: Vec<RangeObservation> = anchors
            .iter()
            .map(|&a| RangeObservation {
                reference: a,
                z: (truth - a).norm(),
                noise_std: 1.0,
            })
            .collect();
        let mut rng = substream(26, &[]);
        let mut belief = ParticleBelief::from_gaussian(
            &Belief3::isotropic(truth + Position3::new(3.0, -2.0, 1.0), 25.0),
            10_000,
            &mut rng,
        );
        let out = spawn_particle_update(&mut belief, &obs, &mut rng);
        assert!(!out.diverged);
        let err = (particle_mmse(&belief) - truth).norm();
        assert!(err < 0.5, "weighted mean error {err}");
    }

    #[test]
    fn resampling_preserves_mean_in_expectation() {
        let mut rng = substream(27, &[]);
        let mut belief = ParticleBelief::from_gaussian(
            &Belief3::isotropic(Position3::default(), 1.0),
            1000,
            &mut rng,
        );
        // Skew the weights toward +x.
        let mut sum = 0.0;
        for (p, w) in belief.particles.iter().zip(belief.weights.iter_mut()) {
            *w = (p.x).exp();
            sum += *w;
        }
        for w in &mut belief.weights {
            *w /= sum;
        }
        let target = belief.weighted_mean();
        let trials = 300;
        let mut acc = Position3::default();
        for _ in 0..trials {
            let mut copy = belief.clone();
            systematic_resample(&mut copy, &mut rng);
            acc = acc + copy.weighted_mean();
        }
        let avg = acc * (1.0 / trials as f64);
        // 3 standard errors; systematic resampling has sub-multinomial
        // variance so the multinomial bound is conservative.
        let per_draw_var = belief
            .weighted_variance()
            .iter()
            .cloned()
            .fold(0.0f64, f64::max)
            / belief.effective_sample_size();
        let tol = 3.0 * (per_draw_var / trials as f64).sqrt() + 1e-3;
        for c in 0..3 {
            assert!(
                (avg.coord(c) - target.coord(c)).abs() < tol,
                "axis {c}: {} vs {}",
                avg.coord(c),
                target.coord(c)
            );
        }
    }
}
