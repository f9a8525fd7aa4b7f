use serde::{Deserialize, Serialize};

use crate::geom::{self, Vec3};

/// Pre-release centroid check threshold.
pub const CENTROID_THRESHOLD: f64 = 1.3;

/// Slack for the post-release polygon check. A loop hanging from the bar is
/// nearly vertical, so its xy projection is a thin sliver and an exact
/// containment test flips on sub-millimetre differences. The goal counts as
/// enclosed when it lies inside the projection or within this distance of it.
pub const POLYGON_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoleCheck {
    pub centroid: bool,
    pub polygon: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub holes: Vec<HoleCheck>,
    pub success: bool,
}

pub fn centroid_check(
    pre_release: &[Vec3],
    loop_vertices: &[usize],
    goal: Vec3,
    threshold: f64,
) -> bool {
    let pts: Vec<Vec3> = loop_vertices.iter().map(|&v| pre_release[v]).collect();
    match geom::centroid(&pts) {
        Some(c) => geom::dist(c, goal) < threshold,
        None => false,
    }
}

pub fn polygon_check(
    post_release: &[Vec3],
    loop_vertices: &[usize],
    goal: Vec3,
    tolerance: f64,
) -> bool {
    if loop_vertices.len() < 3 {
        log::warn!(
            "degenerate loop with {} vertices; polygon check fails",
            loop_vertices.len()
        );
        return false;
    }
    let poly: Vec<[f64; 2]> = loop_vertices
        .iter()
        .map(|&v| [post_release[v][0], post_release[v][1]])
        .collect();
    let q = [goal[0], goal[1]];
    geom::point_in_polygon(q, &poly) || geom::polygon_boundary_distance(q, &poly) <= tolerance
}

/// Success when both checks hold for at least one hole.
pub fn success_check(
    pre_release: &[Vec3],
    post_release: &[Vec3],
    loops: &[Vec<usize>],
    goal: Vec3,
    polygon_tolerance: f64,
) -> SuccessReport {
    let holes: Vec<HoleCheck> = loops
        .iter()
        .map(|l| HoleCheck {
            centroid: centroid_check(pre_release, l, goal, CENTROID_THRESHOLD),
            polygon: polygon_check(post_release, l, goal, polygon_tolerance),
        })
        .collect();
    let success = holes.iter().any(|h| h.centroid && h.polygon);
    SuccessReport { holes, success }
}
