//! Shared helpers for integration tests: independent oracles and fixture
//! scenes. The oracles here deliberately avoid the library's inference path.

#![allow(dead_code)]

use gsticp::models::{LinkClass, Position3};
use gsticp::scene::{segment_intersects_box, Box3, Scene};

/// Gauss-Newton range-only least squares (position from anchor ranges).
/// Independent of the message-passing implementation; used as the
/// convergence oracle.
pub fn trilaterate(observations: &[(Position3, f64)], start: Position3) -> Option<Position3> {
    if observations.len() < 3 {
        return None;
    }
    let mut x = start.to_array();
    for _ in 0..100 {
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for &(anchor, z) in observations {
            let d = [x[0] - anchor.x, x[1] - anchor.y, x[2] - anchor.z];
            let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(1e-9);
            let u = [d[0] / dist, d[1] / dist, d[2] / dist];
            let r = dist - z;
            for i in 0..3 {
                for j in 0..3 {
                    jtj[i][j] += u[i] * u[j];
                }
                jtr[i] += u[i] * r;
            }
        }
        let trace = (jtj[0][0] + jtj[1][1] + jtj[2][2]) / 3.0;
        let damping = (trace * 1e-9).max(1e-12);
        for (i, row) in jtj.iter_mut().enumerate() {
            row[i] += damping;
        }
        let delta = solve3(&jtj, &[-jtr[0], -jtr[1], -jtr[2]])?;
        for i in 0..3 {
            x[i] += delta[i];
        }
        let step = (delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2]).sqrt();
        if step < 1e-10 {
            break;
        }
    }
    Some(Position3::from_array(x))
}

fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    if det.abs() < 1e-30 {
        return None;
    }
    let inv = 1.0 / det;
    Some([
        inv * (b[0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            + b[1] * (a[0][2] * a[2][1] - a[0][1] * a[2][2])
            + b[2] * (a[0][1] * a[1][2] - a[0][2] * a[1][1])),
        inv * (b[0] * (a[1][2] * a[2][0] - a[1][0] * a[2][2])
            + b[1] * (a[0][0] * a[2][2] - a[0][2] * a[2][0])
            + b[2] * (a[0][2] * a[1][0] - a[0][0] * a[1][2])),
        inv * (b[0] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            + b[1] * (a[0][1] * a[2][0] - a[0][0] * a[2][1])
            + b[2] * (a[0][0] * a[1][1] - a[0][1] * a[1][0])),
    ])
}

/// Exhaustive all-boxes LOS classification (no spatial index).
pub fn brute_force_classify(buildings: &[Box3], p: Position3, q: Position3) -> LinkClass {
    if buildings.iter().any(|b| segment_intersects_box(p, q, b)) {
        LinkClass::Nlos
    } else {
        LinkClass::Los
    }
}

/// Exhaustive region query (no spatial index), ids ascending.
pub fn brute_force_region(buildings: &[Box3], region: &Box3) -> Vec<usize> {
    buildings
        .iter()
        .enumerate()
        .filter(|(_, b)| b.intersects_box(region))
        .map(|(i, _)| i)
        .collect()
}

pub fn bx(min: [f64; 3], max: [f64; 3]) -> Box3 {
    Box3::new(Position3::from_array(min), Position3::from_array(max)).unwrap()
}

/// A 5×5 grid of 20 m × 20 m × 38 m towers on 24 m streets inside a
/// 240 × 240 × 40 m volume. Dense enough that well over 30% of links in a
/// random deployment are NLOS.
pub fn urban_scene() -> Scene {
    let bounds = bx([0.0, 0.0, 0.0], [240.0, 240.0, 40.0]);
    let mut buildings = Vec::new();
    for i in 0..5 {
        for j in 0..5 {
            let x0 = 14.0 + 44.0 * i as f64;
            let y0 = 14.0 + 44.0 * j as f64;
            buildings.push(bx([x0, y0, 0.0], [x0 + 20.0, y0 + 20.0, 38.0]));
        }
    }
    Scene::new(bounds, buildings).unwrap()
}
