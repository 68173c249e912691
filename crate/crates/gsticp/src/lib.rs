//! Distributed 3D cooperative positioning in LOS/NLOS mixed environments.
//!
//! A wireless network of `agents` (unknown positions) and `anchors` (known
//! positions) exchanges noisy ranging measurements. Each agent fuses its
//! temporal information (prior / motion prediction) with spatial ranging
//! information from its neighbors by Gaussian message passing on a factor
//! graph, using a 7-point scaled unscented transform to push beliefs through
//! the nonlinear range model. Non-line-of-sight links are identified
//! geometrically against an R-tree of building boxes and discarded before
//! the iterations start; converged agents are upgraded to pseudo-anchors to
//! cut redundant work.
//!
//! Crate layout:
//! - [`models`]: positions, Gaussians, beliefs, measurement and mobility models
//! - [`scene`]: building boxes, spatial index, line-of-sight classification
//! - [`sut`]: sigma points, unscented moments, spatial/temporal messages, fusion
//! - [`netsim`]: the per-slot simulator (neighbor discovery, iteration
//!   schedule, NLOS filtering, anchor upgrading, counters)
//! - [`baselines`]: first-order-Taylor and particle-based comparison localizers
//! - [`eval`]: scenario generation, Monte-Carlo driver, CDF metrics, CSV output
//! - [`rng`]: deterministic substream derivation

pub mod baselines;
pub mod eval;
pub mod models;
pub mod netsim;
pub mod rng;
pub mod scene;
pub mod sut;

pub use models::{Belief3, Gaussian1, LinkClass, Position3, RangeMeasurement};
pub use scene::{Box3, Scene, SceneIndex};
pub use sut::{SigmaSet, SpatialMessage, SutParams, TemporalMessage};
