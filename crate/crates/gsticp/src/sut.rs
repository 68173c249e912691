//! The message-passing inference core: scaled-unscented-transform sigma
//! points and weights, moment propagation through the range model, spatial
//! and temporal Gaussian messages, precision-weighted belief fusion, and the
//! MMSE position estimate.
//!
//! Spatial messages come in two modes. `Default` runs a standard unscented
//! measurement update per coordinate (sigma points through the range
//! function, innovation and cross-covariance, gain correction) and returns
//! the Gaussian quotient posterior/belief, so that fusing the message back
//! into the belief by a density product reproduces the posterior. `Literal`
//! propagates the ranging likelihood values themselves and returns their
//! unscented mean/variance as the message, for auditability; it treats
//! likelihood moments as position moments and is kept only for comparison.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{Belief3, Gaussian1, MobilityParams, NodeId, NodeKind, Position3};

#[derive(Debug, Error, PartialEq)]
pub enum SutError {
    #[error("sigma-point scaling alpha must be a positive finite number, got {0}")]
    InvalidAlpha(f64),
    #[error("sigma-point weight beta must be nonnegative, got {0}")]
    InvalidBeta(f64),
    #[error("belief variance must be positive to draw sigma points")]
    NonPositiveVariance,
}

/// Scaled-unscented-transform parameters for the 3D state.
///
/// `alpha` controls the sigma-point spread; `lambda = 3(alpha² − 1)` so that
/// `n + lambda = 3 alpha²` stays positive for any positive `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SutParams {
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_beta() -> f64 {
    2.0
}

pub const SUT_DIM: usize = 3;
pub const SIGMA_COUNT: usize = 2 * SUT_DIM + 1;

impl Default for SutParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 2.0,
        }
    }
}

impl SutParams {
    pub fn lambda(&self) -> f64 {
        3.0 * (self.alpha * self.alpha - 1.0)
    }

    /// `n + lambda = 3 alpha²`.
    pub fn scaled_dim(&self) -> f64 {
        3.0 * self.alpha * self.alpha
    }

    pub fn validate(&self) -> Result<(), SutError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(SutError::InvalidAlpha(self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(SutError::InvalidBeta(self.beta));
        }
        Ok(())
    }
}

/// The seven sigma points of a belief together with their mean and covariance
/// weights.
#[derive(Debug, Clone, Copy)]
pub struct SigmaSet {
    pub points: [Position3; SIGMA_COUNT],
    pub w_mean: [f64; SIGMA_COUNT],
    pub w_cov: [f64; SIGMA_COUNT],
}

/// Mean and variance of a scalar pushed through the unscented transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnscentedMoments {
    pub mean: f64,
    pub variance: f64,
}

/// A per-coordinate Gaussian spatial message into an agent's belief.
#[derive(Debug, Clone, Copy)]
pub struct SpatialMessage {
    pub coords: [Gaussian1; 3],
    pub source: NodeId,
    pub source_kind: NodeKind,
}

/// The per-coordinate Gaussian temporal message (prior at slot 0, motion
/// prediction afterwards). Fixed for the whole iteration loop of a slot.
#[derive(Debug, Clone, Copy)]
pub struct TemporalMessage {
    pub coords: [Gaussian1; 3],
}

impl TemporalMessage {
    /// At the first slot there is no predecessor belief; the temporal message
    /// is the prior itself.
    pub fn from_prior(prior: &Belief3) -> Self {
        debug_assert!(!prior.is_dirac());
        Self {
            coords: *prior.coords(),
        }
    }

    pub fn mean(&self) -> Position3 {
        Position3::new(self.coords[0].mean, self.coords[1].mean, self.coords[2].mean)
    }
}

/// Which message construction to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageMode {
    /// Unscented measurement update + Gaussian quotient (the operational mode).
    Default,
    /// Likelihood-moment messages exactly as derived, for audit/comparison.
    Literal,
}

/// Result of building one spatial message plus its bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct MessageOutcome {
    pub message: SpatialMessage,
    /// Coordinates (0–3) that fell back to a wide message because the
    /// Gaussian quotient had non-positive precision.
    pub quotient_fallbacks: u32,
    /// Nonlinear propagations performed (one per sigma point).
    pub range_evals: u32,
}

/// Mean and covariance weights for the seven sigma points.
///
/// `w_mean[0] = lambda/(n+lambda)`, `w_cov[0] = w_mean[0] + 1 − alpha² + beta`,
/// and all off-center weights are `1 / (2(n+lambda))`.
pub fn sigma_weights(params: &SutParams) -> ([f64; SIGMA_COUNT], [f64; SIGMA_COUNT]) {
    let scaled = params.scaled_dim();
    let w0_mean = params.lambda() / scaled;
    let w0_cov = w0_mean + 1.0 - params.alpha * params.alpha + params.beta;
    let w_rest = 1.0 / (2.0 * scaled);
    let mut w_mean = [w_rest; SIGMA_COUNT];
    let mut w_cov = [w_rest; SIGMA_COUNT];
    w_mean[0] = w0_mean;
    w_cov[0] = w0_cov;
    (w_mean, w_cov)
}

/// Draws the symmetric 2n+1 sigma points of a diagonal-covariance belief:
/// the mean, then `mean ± sqrt((n+lambda) * variance_c)` along each axis.
pub fn generate_sigma_points(belief: &Belief3, params: &SutParams) -> Result<SigmaSet, SutError> {
    params.validate()?;
    let variances = belief.variances();
    if belief.is_dirac() || variances.iter().any(|&v| v <= 0.0) {
        return Err(SutError::NonPositiveVariance);
    }
    let mean = belief.mean();
    let scaled = params.scaled_dim();
    let mut points = [mean; SIGMA_COUNT];
    for axis in 0..3 {
        let offset = (scaled * variances[axis]).sqrt();
        let mut plus = mean.to_array();
        plus[axis] += offset;
        let mut minus = mean.to_array();
        minus[axis] -= offset;
        points[1 + axis] = Position3::from_array(plus);
        points[4 + axis] = Position3::from_array(minus);
    }
    let (w_mean, w_cov) = sigma_weights(params);
    Ok(SigmaSet {
        points,
        w_mean,
        w_cov,
    })
}

/// Pushes each sigma point through the range function to a fixed reference.
pub fn transform_range(sigma: &SigmaSet, reference: Position3) -> [f64; SIGMA_COUNT] {
    let mut out = [0.0; SIGMA_COUNT];
    for (slot, point) in out.iter_mut().zip(sigma.points.iter()) {
        *slot = (*point - reference).norm();
    }
    out
}

/// Pushes each sigma point through the ranging likelihood (the literal-mode
/// propagated quantity).
pub fn transform_likelihood(
    sigma: &SigmaSet,
    reference: Position3,
    z: f64,
    noise_std: f64,
) -> [f64; SIGMA_COUNT] {
    let mut out = [0.0; SIGMA_COUNT];
    for (slot, point) in out.iter_mut().zip(sigma.points.iter()) {
        *slot = crate::models::range_likelihood(z, *point, reference, noise_std);
    }
    out
}

/// Weighted mean and variance of transformed sigma values. A negative
/// variance (possible because the center covariance weight can be negative)
/// is floored at zero.
pub fn unscented_moments(
    values: &[f64; SIGMA_COUNT],
    w_mean: &[f64; SIGMA_COUNT],
    w_cov: &[f64; SIGMA_COUNT],
) -> UnscentedMoments {
    let mut mean = 0.0;
    for a in 0..SIGMA_COUNT {
        mean += w_mean[a] * values[a];
    }
    let mut variance = 0.0;
    for a in 0..SIGMA_COUNT {
        let dev = values[a] - mean;
        variance += w_cov[a] * dev * dev;
    }
    UnscentedMoments {
        mean,
        variance: variance.max(0.0),
    }
}

/// Extra innovation variance contributed by an uncertain reference position:
/// the neighbor's covariance projected onto the unit baseline direction.
fn baseline_variance_projection(
    from_mean: Position3,
    neighbor_mean: Position3,
    neighbor_variance: [f64; 3],
) -> f64 {
    let baseline = from_mean - neighbor_mean;
    let dist = baseline.norm();
    if dist < 1e-9 {
        // Coincident means: no direction to project on; isotropic average.
        return (neighbor_variance[0] + neighbor_variance[1] + neighbor_variance[2]) / 3.0;
    }
    let u = baseline * (1.0 / dist);
    let ua = u.to_array();
    (0..3).map(|c| ua[c] * ua[c] * neighbor_variance[c]).sum()
}

const WIDE_MESSAGE_FACTOR: f64 = 10.0;
const LITERAL_VARIANCE_FLOOR: f64 = 1e-12;

/// Builds the spatial message a ranging link sends into the receiving
/// agent's position belief.
///
/// `neighbor_variance` is the broadcast per-coordinate variance of the
/// neighbor's belief, or `None` when the neighbor's position is exact (anchor
/// or pseudo-anchor broadcast). In the default mode the neighbor uncertainty
/// inflates the innovation variance; in literal mode the caller applies
/// [`moderate_agent_message`] for agent neighbors instead.
#[allow(clippy::too_many_arguments)]
pub fn sut_spatial_message(
    belief: &Belief3,
    neighbor_mean: Position3,
    neighbor_variance: Option<[f64; 3]>,
    z: f64,
    noise_std: f64,
    params: &SutParams,
    mode: MessageMode,
    source: NodeId,
    source_kind: NodeKind,
) -> Result<MessageOutcome, SutError> {
    debug_assert!(noise_std > 0.0);
    let sigma = generate_sigma_points(belief, params)?;

    match mode {
        MessageMode::Literal => {
            let g = transform_likelihood(&sigma, neighbor_mean, z, noise_std);
            let moments = unscented_moments(&g, &sigma.w_mean, &sigma.w_cov);
            let coord = Gaussian1::new(moments.mean, moments.variance.max(LITERAL_VARIANCE_FLOOR));
            Ok(MessageOutcome {
                message: SpatialMessage {
                    coords: [coord; 3],
                    source,
                    source_kind,
                },
                quotient_fallbacks: 0,
                range_evals: SIGMA_COUNT as u32,
            })
        }
        MessageMode::Default => {
            let ranges = transform_range(&sigma, neighbor_mean);
            let predicted = unscented_moments(&ranges, &sigma.w_mean, &sigma.w_cov);
            let z_hat = predicted.mean;
            let mut innovation_var = predicted.variance + noise_std * noise_std;
            if let Some(vars) = neighbor_variance {
                innovation_var +=
                    baseline_variance_projection(belief.mean(), neighbor_mean, vars);
            }
            let innovation = z - z_hat;
            let mean = belief.mean().to_array();
            let variances = belief.variances();

            let mut coords = [Gaussian1::new(0.0, 1.0); 3];
            let mut fallbacks = 0u32;
            for c in 0..3 {
                let mut cross = 0.0;
                for a in 0..SIGMA_COUNT {
                    cross += sigma.w_cov[a]
                        * (sigma.points[a].coord(c) - mean[c])
                        * (ranges[a] - z_hat);
                }
                let gain = cross / innovation_var;
                let post_mean = mean[c] + gain * innovation;
                let post_var = variances[c] - gain * cross;

                // Message = posterior / belief, computed in a cancellation-free
                // form: precision = (cross²/S) / (post_var · belief_var).
                let msg = if post_var > 0.0 && cross != 0.0 {
                    let precision = (cross * cross / innovation_var) / (post_var * variances[c]);
                    let variance = 1.0 / precision;
                    if variance.is_finite() && variance > 0.0 {
                        let mean_q =
                            (post_mean / post_var - mean[c] / variances[c]) * variance;
                        Some(Gaussian1::new(mean_q, variance))
                    } else {
                        None
                    }
                } else {
                    None
                };
                coords[c] = msg.unwrap_or_else(|| {
                    fallbacks += 1;
                    Gaussian1::new(post_mean, WIDE_MESSAGE_FACTOR * variances[c])
                });
            }
            Ok(MessageOutcome {
                message: SpatialMessage {
                    coords,
                    source,
                    source_kind,
                },
                quotient_fallbacks: fallbacks,
                range_evals: SIGMA_COUNT as u32,
            })
        }
    }
}

/// Accounts for an agent neighbor's own position uncertainty in a message.
///
/// Default mode convolves: per-coordinate variance grows by the neighbor's
/// belief variance, mean unchanged; in the exact-neighbor limit the message
/// is returned untouched. Literal mode forms the precision-weighted product
/// of the message and the neighbor belief per coordinate.
pub fn moderate_agent_message(
    msg: &SpatialMessage,
    neighbor_belief: &Belief3,
    mode: MessageMode,
) -> SpatialMessage {
    debug_assert!(!neighbor_belief.is_dirac());
    let mut coords = msg.coords;
    for c in 0..3 {
        let nb = neighbor_belief.coord(c);
        coords[c] = match mode {
            MessageMode::Default => {
                Gaussian1::new(msg.coords[c].mean, msg.coords[c].variance + nb.variance)
            }
            MessageMode::Literal => msg.coords[c].product(&nb),
        };
    }
    SpatialMessage { coords, ..*msg }
}

/// The temporal message for slot `t`: the previous belief shifted by the
/// internal displacement observation, inflated by the per-coordinate mobility
/// process variance (`step_std²/3`, the isotropic step split over three
/// coordinates) plus odometry noise.
pub fn temporal_prediction(
    prev_belief: &Belief3,
    internal_z: [f64; 3],
    mobility: &MobilityParams,
) -> TemporalMessage {
    debug_assert!(!prev_belief.is_dirac());
    let step_var = mobility.step_std * mobility.step_std / 3.0;
    let odo_var = mobility.odometry_std * mobility.odometry_std;
    let mut coords = *prev_belief.coords();
    for c in 0..3 {
        coords[c] = Gaussian1::new(
            coords[c].mean + internal_z[c],
            coords[c].variance + step_var + odo_var,
        );
    }
    TemporalMessage { coords }
}

/// Fuses the temporal message with all spatial messages by per-coordinate
/// precision-weighted Gaussian products.
pub fn fuse_belief(temporal: &TemporalMessage, spatial: &[SpatialMessage]) -> Belief3 {
    if spatial.is_empty() {
        return Belief3::from_coords(temporal.coords);
    }
    let mut coords = [Gaussian1::new(0.0, 1.0); 3];
    for c in 0..3 {
        let mut precision = temporal.coords[c].precision();
        let mut weighted = temporal.coords[c].mean * precision;
        for msg in spatial {
            let p = msg.coords[c].precision();
            precision += p;
            weighted += msg.coords[c].mean * p;
        }
        let variance = 1.0 / precision;
        coords[c] = Gaussian1::new(weighted * variance, variance);
    }
    Belief3::from_coords(coords)
}

/// The MMSE position estimate of a belief: for per-coordinate Gaussians this
/// is the mean vector.
pub fn mmse_estimate(belief: &Belief3) -> Position3 {
    belief.mean()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(coords: [Gaussian1; 3]) -> SpatialMessage {
        SpatialMessage {
            coords,
            source: NodeId(0),
            source_kind: NodeKind::Agent,
        }
    }

    fn iso(g: Gaussian1) -> [Gaussian1; 3] {
        [g; 3]
    }

    #[test]
    fn weights_alpha_one() {
        let (wm, wc) = sigma_weights(&SutParams {
            alpha: 1.0,
            beta: 2.0,
        });
        assert_eq!(wm[0], 0.0);
        assert_eq!(wc[0], 2.0);
        for a in 1..SIGMA_COUNT {
            assert!((wm[a] - 1.0 / 6.0).abs() < 1e-15);
            assert_eq!(wm[a], wc[a]);
        }
    }

    #[test]
    fn weights_alpha_half() {
        let (wm, wc) = sigma_weights(&SutParams {
            alpha: 0.5,
            beta: 2.0,
        });
        assert_eq!(wm[0], -3.0);
        assert_eq!(wc[0], -0.25);
        for a in 1..SIGMA_COUNT {
            assert!((wm[a] - 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mean_weights_sum_to_one() {
        for alpha in [0.3, 0.5, 0.7, 1.0, 1.3] {
            let (wm, _) = sigma_weights(&SutParams { alpha, beta: 2.0 });
            let sum: f64 = wm.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "alpha={alpha}: sum={sum}");
        }
    }

    #[test]
    fn sigma_points_unit_isotropic() {
        let belief = Belief3::isotropic(Position3::default(), 1.0);
        let set = generate_sigma_points(
            &belief,
            &SutParams {
                alpha: 1.0,
                beta: 2.0,
            },
        )
        .unwrap();
        let r3 = 3.0f64.sqrt();
        assert_eq!(set.points[0], Position3::default());
        assert_eq!(set.points[1], Position3::new(r3, 0.0, 0.0));
        assert_eq!(set.points[2], Position3::new(0.0, r3, 0.0));
        assert_eq!(set.points[3], Position3::new(0.0, 0.0, r3));
        assert_eq!(set.points[4], Position3::new(-r3, 0.0, 0.0));
        assert_eq!(set.points[5], Position3::new(0.0, -r3, 0.0));
        assert_eq!(set.points[6], Position3::new(0.0, 0.0, -r3));
    }

    #[test]
    fn sigma_points_anisotropic_alpha_half() {
        let mean = Position3::new(1.0, 2.0, 3.0);
        let belief = Belief3::gaussian(mean, [4.0, 1.0, 9.0]);
        let set = generate_sigma_points(
            &belief,
            &SutParams {
                alpha: 0.5,
                beta: 2.0,
            },
        )
        .unwrap();
        assert_eq!(set.points[0], mean);
        assert!((set.points[1].x - (1.0 + 3.0f64.sqrt())).abs() < 1e-15);
        assert!((set.points[2].y - (2.0 + 0.75f64.sqrt())).abs() < 1e-15);
        assert!((set.points[3].z - (3.0 + 6.75f64.sqrt())).abs() < 1e-15);
        assert!((set.points[4].x - (1.0 - 3.0f64.sqrt())).abs() < 1e-15);
        assert_eq!(set.points[4].y, 2.0);
        assert_eq!(set.points[5].z, 3.0);
    }

    #[test]
    fn sigma_points_require_positive_variance() {
        let dirac = Belief3::dirac(Position3::default());
        assert_eq!(
            generate_sigma_points(&dirac, &SutParams::default()).unwrap_err(),
            SutError::NonPositiveVariance
        );
    }

    #[test]
    fn transform_range_examples() {
        let reference = Position3::new(3.0, 4.0, 0.0);
        let belief = Belief3::isotropic(Position3::default(), 1.0);
        let set = generate_sigma_points(&belief, &SutParams::default()).unwrap();
        let ranges = transform_range(&set, reference);
        assert_eq!(ranges[0], 5.0);

        // All points on the reference: zero ranges.
        let mut degenerate = set;
        degenerate.points = [reference; SIGMA_COUNT];
        assert_eq!(transform_range(&degenerate, reference), [0.0; SIGMA_COUNT]);

        // Likelihood at exactly the observed ranges is 1 everywhere; the
        // moments degenerate to (1, 0) up to weight rounding.
        let g = transform_likelihood(&degenerate, reference, 0.0, 1.0);
        assert_eq!(g, [1.0; SIGMA_COUNT]);
        let m = unscented_moments(&g, &set.w_mean, &set.w_cov);
        assert!((m.mean - 1.0).abs() < 1e-12);
        assert!(m.variance < 1e-12);
    }

    #[test]
    fn moments_constant_values() {
        let (wm, wc) = sigma_weights(&SutParams::default());
        let m = unscentes_const(&wm, &wc, 4.2);
        assert!((m.mean - 4.2).abs() < 1e-12);
        assert!(m.variance.abs() < 1e-12);
    }

    fn unscentes_const(
        wm: &[f64; SIGMA_COUNT],
        wc: &[f64; SIGMA_COUNT],
        c: f64,
    ) -> UnscentedMoments {
        unscented_moments(&[c; SIGMA_COUNT], wm, wc)
    }

    #[test]
    fn moments_zero_center_weight_ignores_center() {
        let (wm, wc) = sigma_weights(&SutParams {
            alpha: 1.0,
            beta: 2.0,
        });
        let m = unscented_moments(&[999.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0], &wm, &wc);
        assert!((m.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moments_hand_evaluated() {
        // alpha = 1: w_m = (0, 1/6 ×6), w_c = (2, 1/6 ×6).
        // values (0, 2, 0, 0, 0, 0, 0): mean = 1/3,
        // variance = 2·(1/3)² + (1/6)(5/3)² + 5·(1/6)(1/3)² = 7/9.
        let (wm, wc) = sigma_weights(&SutParams {
            alpha: 1.0,
            beta: 2.0,
        });
        let m = unscented_moments(&[0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0], &wm, &wc);
        assert!((m.mean - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.variance - 7.0 / 9.0).abs() < 1e-12, "{}", m.variance);
    }

    #[test]
    fn default_message_zero_innovation_fixed_point() {
        let belief = Belief3::isotropic(Position3::new(10.0, 20.0, 5.0), 1.0);
        let neighbor = Position3::new(110.0, 20.0, 5.0);
        let z = (belief.mean() - neighbor).norm();
        let out = sut_spatial_message(
            &belief,
            neighbor,
            None,
            z,
            1.0,
            &SutParams::default(),
            MessageMode::Default,
            NodeId(1),
            NodeKind::Anchor,
        )
        .unwrap();
        // The unscented range prediction carries a small curvature term
        // (≈ transverse variance / distance), so the fixed point is exact
        // only up to that correction.
        for c in 0..3 {
            let drift = (out.message.coords[c].mean - belief.mean().coord(c)).abs();
            assert!(drift < 0.02, "coordinate {c} drifted {drift}");
        }
    }

    #[test]
    fn default_message_pulls_along_baseline_only() {
        let belief = Belief3::isotropic(Position3::default(), 1.0);
        let neighbor = Position3::new(100.0, 0.0, 0.0);
        let out = sut_spatial_message(
            &belief,
            neighbor,
            None,
            90.0,
            1.0,
            &SutParams::default(),
            MessageMode::Default,
            NodeId(1),
            NodeKind::Anchor,
        )
        .unwrap();
        // Shorter-than-predicted range pulls the x-mean toward the neighbor.
        assert!(
            out.message.coords[0].mean > 1.0,
            "x message mean {}",
            out.message.coords[0].mean
        );
        // Orthogonal coordinates stay essentially uninformed.
        for c in 1..3 {
            assert!((out.message.coords[c].mean - 0.0).abs() < 1e-6);
            assert!(out.message.coords[c].variance >= WIDE_MESSAGE_FACTOR);
        }
    }

    #[test]
    fn default_message_fuses_back_to_posterior() {
        // fuse(belief-as-temporal, message) must reproduce the unscented
        // posterior; verified through the quotient identity on a plain link.
        let belief = Belief3::gaussian(Position3::new(1.0, -2.0, 3.0), [4.0, 2.0, 1.0]);
        let neighbor = Position3::new(40.0, 10.0, -20.0);
        let out = sut_spatial_message(
            &belief,
            neighbor,
            None,
            45.0,
            2.0,
            &SutParams::default(),
            MessageMode::Default,
            NodeId(1),
            NodeKind::Anchor,
        )
        .unwrap();
        let temporal = TemporalMessage {
            coords: *belief.coords(),
        };
        let fused = fuse_belief(&temporal, &[out.message]);
        // Posterior variance must shrink relative to the belief on the
        // informed coordinates and the fused mean must be finite and pulled
        // toward consistency.
        for c in 0..3 {
            assert!(fused.coord(c).variance <= belief.coord(c).variance + 1e-12);
            assert!(fused.coord(c).mean.is_finite());
        }
    }

    #[test]
    fn literal_message_is_likelihood_moments() {
        let belief = Belief3::isotropic(Position3::default(), 1.0);
        let neighbor = Position3::new(50.0, 0.0, 0.0);
        let out = sut_spatial_message(
            &belief,
            neighbor,
            None,
            50.0,
            1.0,
            &SutParams::default(),
            MessageMode::Literal,
            NodeId(1),
            NodeKind::Anchor,
        )
        .unwrap();
        let c = out.message.coords;
        assert_eq!(c[0], c[1]);
        assert_eq!(c[1], c[2]);
        assert!(c[0].mean > 0.0 && c[0].mean <= 1.0);
        assert!(c[0].variance > 0.0);
    }

    #[test]
    fn moderate_default_convolves_variances() {
        let m = msg(iso(Gaussian1::new(5.0, 1.0)));
        let neighbor = Belief3::isotropic(Position3::default(), 3.0);
        let out = moderate_agent_message(&m, &neighbor, MessageMode::Default);
        for c in 0..3 {
            assert_eq!(out.coords[c].mean, 5.0);
            assert_eq!(out.coords[c].variance, 4.0);
        }
    }

    #[test]
    fn moderate_default_anchor_limit() {
        let m = msg(iso(Gaussian1::new(5.0, 1.0)));
        let near_dirac = Belief3::isotropic(Position3::default(), 1e-12);
        let out = moderate_agent_message(&m, &near_dirac, MessageMode::Default);
        for c in 0..3 {
            assert!((out.coords[c].variance - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn moderate_literal_precision_product() {
        let m = msg(iso(Gaussian1::new(0.0, 1.0)));
        let neighbor = Belief3::isotropic(Position3::new(2.0, 2.0, 2.0), 1.0);
        let out = moderate_agent_message(&m, &neighbor, MessageMode::Literal);
        for c in 0..3 {
            assert!((out.coords[c].mean - 1.0).abs() < 1e-12);
            assert!((out.coords[c].variance - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn temporal_prediction_static_node() {
        let prev = Belief3::isotropic(Position3::new(1.0, 2.0, 3.0), 2.0);
        let still = MobilityParams {
            step_std: 0.0,
            odometry_std: 0.0,
        };
        let t = temporal_prediction(&prev, [0.0; 3], &still);
        assert_eq!(t.coords, *prev.coords());
    }

    #[test]
    fn temporal_prediction_shift_and_inflate() {
        let prev = Belief3::isotropic(Position3::default(), 1.0);
        let mob = MobilityParams {
            step_std: 0.0,
            odometry_std: 1.0,
        };
        let t = temporal_prediction(&prev, [3.0, 0.0, 0.0], &mob);
        assert_eq!(t.coords[0], Gaussian1::new(3.0, 2.0));
        assert_eq!(t.coords[1], Gaussian1::new(0.0, 2.0));
        assert_eq!(t.coords[2], Gaussian1::new(0.0, 2.0));
    }

    #[test]
    fn fuse_empty_returns_temporal() {
        let temporal = TemporalMessage {
            coords: iso(Gaussian1::new(1.5, 0.7)),
        };
        let fused = fuse_belief(&temporal, &[]);
        assert_eq!(*fused.coords(), temporal.coords);
        assert_eq!(mmse_estimate(&fused), temporal.mean());
    }

    #[test]
    fn fuse_equal_precision_pair() {
        let temporal = TemporalMessage {
            coords: iso(Gaussian1::new(0.0, 1.0)),
        };
        let fused = fuse_belief(&temporal, &[msg(iso(Gaussian1::new(2.0, 1.0)))]);
        for c in 0..3 {
            assert!((fused.coord(c).mean - 1.0).abs() < 1e-12);
            assert!((fused.coord(c).variance - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn fuse_hand_evaluated_triple() {
        let temporal = TemporalMessage {
            coords: iso(Gaussian1::new(0.0, 1.0)),
        };
        let fused = fuse_belief(
            &temporal,
            &[
                msg(iso(Gaussian1::new(3.0, 1.0))),
                msg(iso(Gaussian1::new(3.0, 0.5))),
            ],
        );
        for c in 0..3 {
            assert!((fused.coord(c).mean - 2.25).abs() < 1e-12);
            assert!((fused.coord(c).variance - 0.25).abs() < 1e-12);
            assert!((mmse_estimate(&fused).coord(c) - 2.25).abs() < 1e-12);
        }
    }

    #[test]
    fn mmse_is_the_mean() {
        let belief = Belief3::gaussian(Position3::new(1.0, 2.0, 3.0), [1.0; 3]);
        assert_eq!(mmse_estimate(&belief), Position3::new(1.0, 2.0, 3.0));
        let dirac = Belief3::dirac(Position3::new(-4.0, 0.5, 9.0));
        assert_eq!(mmse_estimate(&dirac), Position3::new(-4.0, 0.5, 9.0));
    }

    #[test]
    fn quotient_recovers_belief_after_fusion() {
        let belief = Gaussian1::new(1.0, 2.0);
        let message = Gaussian1::new(4.0, 3.0);
        let fused = belief.product(&message);
        let recovered = fused.quotient(&message).unwrap();
        assert!((recovered.mean - belief.mean).abs() < 1e-9);
        assert!((recovered.variance - belief.variance).abs() < 1e-9);
    }
}
