//! Geographic environment: axis-aligned building boxes, an R-tree over them,
//! and line-of-sight queries between 3D points.
//!
//! A ranging link is NLOS when the closed segment between the two endpoints
//! intersects at least one building box (closed-set semantics: touching a
//! face counts, and an endpoint inside a box counts).

use std::path::Path;

use rstar::{RTree, RTreeObject, AABB};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{LinkClass, Position3};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scene file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid box: min > max on coordinate {axis} ({min} > {max})")]
    InvalidBox { axis: char, min: f64, max: f64 },
    #[error("invalid box: non-finite coordinate {axis}")]
    NonFinite { axis: char },
    #[error("building {index} extends outside the scene bounds")]
    BuildingOutsideBounds { index: usize },
}

const AXIS_NAMES: [char; 3] = ['x', 'y', 'z'];

/// An axis-aligned box, corners in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct Box3 {
    min: Position3,
    max: Position3,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    min: [f64; 3],
    max: [f64; 3],
}

impl TryFrom<BoxRepr> for Box3 {
    type Error = SceneError;
    fn try_from(r: BoxRepr) -> Result<Self, SceneError> {
        Box3::new(Position3::from_array(r.min), Position3::from_array(r.max))
    }
}

impl From<Box3> for BoxRepr {
    fn from(b: Box3) -> Self {
        BoxRepr {
            min: b.min.to_array(),
            max: b.max.to_array(),
        }
    }
}

impl Box3 {
    pub fn new(min: Position3, max: Position3) -> Result<Self, SceneError> {
        let (lo, hi) = (min.to_array(), max.to_array());
        for c in 0..3 {
            if !lo[c].is_finite() || !hi[c].is_finite() {
                return Err(SceneError::NonFinite {
                    axis: AXIS_NAMES[c],
                });
            }
            if lo[c] > hi[c] {
                return Err(SceneError::InvalidBox {
                    axis: AXIS_NAMES[c],
                    min: lo[c],
                    max: hi[c],
                });
            }
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> Position3 {
        self.min
    }

    pub fn max(&self) -> Position3 {
        self.max
    }

    /// Closed-set point containment.
    pub fn contains_point(&self, p: Position3) -> bool {
        let (lo, hi, pa) = (self.min.to_array(), self.max.to_array(), p.to_array());
        (0..3).all(|c| pa[c] >= lo[c] && pa[c] <= hi[c])
    }

    pub fn contains_box(&self, other: &Box3) -> bool {
        self.contains_point(other.min) && self.contains_point(other.max)
    }

    /// Closed-set box overlap (touching faces intersect).
    pub fn intersects_box(&self, other: &Box3) -> bool {
        let (alo, ahi) = (self.min.to_array(), self.max.to_array());
        let (blo, bhi) = (other.min.to_array(), other.max.to_array());
        (0..3).all(|c| alo[c] <= bhi[c] && ahi[c] >= blo[c])
    }

    pub fn clamp(&self, p: Position3) -> Position3 {
        let (lo, hi, pa) = (self.min.to_array(), self.max.to_array(), p.to_array());
        Position3::new(
            pa[0].clamp(lo[0], hi[0]),
            pa[1].clamp(lo[1], hi[1]),
            pa[2].clamp(lo[2], hi[2]),
        )
    }

    /// The smallest box containing both endpoints of a segment.
    pub fn segment_envelope(p: Position3, q: Position3) -> Box3 {
        let (pa, qa) = (p.to_array(), q.to_array());
        Box3 {
            min: Position3::new(pa[0].min(qa[0]), pa[1].min(qa[1]), pa[2].min(qa[2])),
            max: Position3::new(pa[0].max(qa[0]), pa[1].max(qa[1]), pa[2].max(qa[2])),
        }
    }
}

/// The environment: building boxes inside an area-of-interest bounding box.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SceneRepr")]
pub struct Scene {
    bounds: Box3,
    buildings: Vec<Box3>,
}

#[derive(Deserialize)]
struct SceneRepr {
    bounds: Box3,
    #[serde(default)]
    buildings: Vec<Box3>,
}

impl TryFrom<SceneRepr> for Scene {
    type Error = SceneError;
    fn try_from(r: SceneRepr) -> Result<Self, SceneError> {
        Scene::new(r.bounds, r.buildings)
    }
}

impl Scene {
    pub fn new(bounds: Box3, buildings: Vec<Box3>) -> Result<Self, SceneError> {
        for (index, b) in buildings.iter().enumerate() {
            if !bounds.contains_box(b) {
                return Err(SceneError::BuildingOutsideBounds { index });
            }
        }
        Ok(Self { bounds, buildings })
    }

    /// A scene with no buildings (every link is LOS).
    pub fn empty(bounds: Box3) -> Self {
        Self {
            bounds,
            buildings: Vec::new(),
        }
    }

    pub fn bounds(&self) -> &Box3 {
        &self.bounds
    }

    pub fn buildings(&self) -> &[Box3] {
        &self.buildings
    }

    /// Parses a scene from JSON text. Unknown keys are ignored.
    pub fn from_json_str(text: &str) -> Result<Self, SceneError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Loads and validates a scene file (UTF-8 JSON, see `Scene` schema).
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scene::from_json_str(&text)
}

struct IndexedBox {
    bbox: Box3,
    id: usize,
}

impl RTreeObject for IndexedBox {
    type Envelope = AABB<[f64; 3]>;

    fn envelope(&self) -> Self::Envelope {
        AABB::from_corners(self.bbox.min().to_array(), self.bbox.max().to_array())
    }
}

/// An R-tree over a scene's buildings. Immutable after construction; queries
/// are safe from any number of threads.
pub struct SceneIndex {
    tree: RTree<IndexedBox>,
    buildings: Vec<Box3>,
}

/// Bulk-loads an R-tree over the scene's buildings.
pub fn build_index(scene: &Scene) -> SceneIndex {
    let items = scene
        .buildings()
        .iter()
        .enumerate()
        .map(|(id, &bbox)| IndexedBox { bbox, id })
        .collect();
    SceneIndex {
        tree: RTree::bulk_load(items),
        buildings: scene.buildings().to_vec(),
    }
}

impl SceneIndex {
    pub fn for_scene(scene: &Scene) -> Self {
        build_index(scene)
    }

    pub fn buildings(&self) -> &[Box3] {
        &self.buildings
    }

    /// Ids of buildings whose boxes intersect the region (closed semantics),
    /// in ascending id order.
    pub fn query_region(&self, region: &Box3) -> Vec<usize> {
        let envelope = AABB::from_corners(region.min().to_array(), region.max().to_array());
        let mut ids: Vec<usize> = self
            .tree
            .locate_in_envelope_intersecting(&envelope)
            .filter(|item| item.bbox.intersects_box(region))
            .map(|item| item.id)
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Candidate building ids whose boxes intersect the segment's envelope.
    fn segment_candidates(&self, p: Position3, q: Position3) -> impl Iterator<Item = &IndexedBox> {
        let env = Box3::segment_envelope(p, q);
        let envelope = AABB::from_corners(env.min().to_array(), env.max().to_array());
        self.tree.locate_in_envelope_intersecting(&envelope)
    }
}

/// Closed-segment / closed-box intersection via the slab method. An endpoint
/// inside or on the box counts; tangency to a face counts.
pub fn segment_intersects_box(p: Position3, q: Position3, bbox: &Box3) -> bool {
    let pa = p.to_array();
    let qa = q.to_array();
    let lo = bbox.min().to_array();
    let hi = bbox.max().to_array();
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for c in 0..3 {
        let d = qa[c] - pa[c];
        if d == 0.0 {
            if pa[c] < lo[c] || pa[c] > hi[c] {
                return false;
            }
        } else {
            let inv = 1.0 / d;
            let ta = (lo[c] - pa[c]) * inv;
            let tb = (hi[c] - pa[c]) * inv;
            let (near, far) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// Classifies the link between two points: NLOS when any building blocks the
/// straight segment, LOS otherwise. Candidates come from the R-tree; each is
/// confirmed with the exact segment test.
pub fn classify_link(index: &SceneIndex, p: Position3, q: Position3) -> LinkClass {
    for item in index.segment_candidates(p, q) {
        if segment_intersects_box(p, q, &item.bbox) {
            return LinkClass::Nlos;
        }
    }
    LinkClass::Los
}
