//! Spatial-index correctness against exhaustive linear scans, on random
//! scenes, plus property tests for the segment predicate.

mod common;

use common::{brute_force_classify, brute_force_region, bx};
use gsticp::models::Position3;
use gsticp::scene::{classify_link, segment_intersects_box, Box3, Scene, SceneIndex};
use proptest::prelude::*;
use rand::Rng;

fn random_box(rng: &mut impl Rng, extent: f64, max_size: f64) -> Box3 {
    let mut min = [0.0; 3];
    let mut max = [0.0; 3];
    for c in 0..3 {
        let a = rng.gen_range(0.0..extent);
        let size = rng.gen_range(0.0..max_size);
        min[c] = a;
        max[c] = (a + size).min(extent);
    }
    bx(min, max)
}

fn random_point(rng: &mut impl Rng, extent: f64) -> Position3 {
    Position3::new(
        rng.gen_range(0.0..extent),
        rng.gen_range(0.0..extent),
        rng.gen_range(0.0..extent),
    )
}

#[test]
fn region_queries_match_linear_scan() {
    let extent = 1000.0;
    let bounds = bx([0.0; 3], [extent; 3]);
    let mut rng = gsticp::rng::substream(101, &[]);
    let buildings: Vec<Box3> = (0..500).map(|_| random_box(&mut rng, extent, 60.0)).collect();
    let scene = Scene::new(bounds, buildings).unwrap();
    let index = SceneIndex::for_scene(&scene);
    for _ in 0..1000 {
        let region = random_box(&mut rng, extent, 200.0);
        let got = index.query_region(&region);
        let expect = brute_force_region(scene.buildings(), &region);
        assert_eq!(got, expect);
    }
}

#[test]
fn classification_matches_brute_force() {
    let extent = 500.0;
    let bounds = bx([0.0; 3], [extent; 3]);
    let mut rng = gsticp::rng::substream(102, &[]);
    let buildings: Vec<Box3> = (0..200).map(|_| random_box(&mut rng, extent, 50.0)).collect();
    let scene = Scene::new(bounds, buildings).unwrap();
    let index = SceneIndex::for_scene(&scene);
    for _ in 0..500 {
        let p = random_point(&mut rng, extent);
        let q = random_point(&mut rng, extent);
        assert_eq!(
            classify_link(&index, p, q),
            brute_force_classify(scene.buildings(), p, q)
        );
    }
}

fn arb_point() -> impl Strategy<Value = Position3> {
    (-50.0..150.0f64, -50.0..150.0f64, -50.0..150.0f64)
        .prop_map(|(x, y, z)| Position3::new(x, y, z))
}

fn arb_box() -> impl Strategy<Value = Box3> {
    (
        0.0..100.0f64,
        0.0..100.0f64,
        0.0..100.0f64,
        0.0..40.0f64,
        0.0..40.0f64,
        0.0..40.0f64,
    )
        .prop_map(|(x, y, z, dx, dy, dz)| {
            bx([x, y, z], [x + dx, y + dy, z + dz])
        })
}

proptest! {
    #[test]
    fn segment_test_is_symmetric(p in arb_point(), q in arb_point(), b in arb_box()) {
        prop_assert_eq!(
            segment_intersects_box(p, q, &b),
            segment_intersects_box(q, p, &b)
        );
    }

    #[test]
    fn intersected_boxes_are_inside_the_segment_envelope(
        p in arb_point(),
        q in arb_point(),
        b in arb_box()
    ) {
        // Candidate retrieval uses the segment envelope; any box the exact
        // test accepts must overlap that envelope.
        if segment_intersects_box(p, q, &b) {
            let env = Box3::segment_envelope(p, q);
            prop_assert!(env.intersects_box(&b));
        }
    }

    #[test]
    fn classify_agrees_with_brute_force_randomized(
        boxes in prop::collection::vec(arb_box(), 0..40),
        p in arb_point(),
        q in arb_point()
    ) {
        let bounds = bx([-100.0; 3], [200.0; 3]);
        let scene = Scene::new(bounds, boxes).unwrap();
        let index = SceneIndex::for_scene(&scene);
        prop_assert_eq!(
            classify_link(&index, p, q),
            brute_force_classify(scene.buildings(), p, q)
        );
    }
}
