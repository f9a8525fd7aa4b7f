//! Procedural cloth and rectangular hole generation.
//!
//! Grid coordinates `(i, j)` index columns and rows of the vertex grid; row
//! `j = 0` is the top edge, where the grippers attach.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geom::{self, Vec3};

pub const DEFAULT_NODE_DENSITY: usize = 25;
pub const HOLE_EXTENT_RANGE: (usize, usize) = (5, 7);
pub const SIZE_RANGE: (f64, f64) = (0.8, 1.2);
pub const MAX_GENERATION_ATTEMPTS: usize = 10_000;

/// World placement of the undeformed cloth.
pub const CLOTH_POSITION: Vec3 = [0.0, 5.0, 8.0];
pub const CLOTH_EULER: Vec3 = [
    -std::f64::consts::FRAC_PI_2,
    0.0,
    3.0 * std::f64::consts::FRAC_PI_2,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoleSpec {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl HoleSpec {
    /// True when grid vertex `(i, j)` lies strictly inside the rectangle.
    pub fn contains_strictly(&self, i: usize, j: usize) -> bool {
        i > self.x0 && i < self.x1 && j > self.y0 && j < self.y1
    }

    fn overlaps(&self, other: &HoleSpec) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    /// Grid coordinates of the rectangle boundary, walked once around.
    pub fn perimeter(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in self.x0..=self.x1 {
            out.push((i, self.y0));
        }
        for j in self.y0 + 1..=self.y1 {
            out.push((self.x1, j));
        }
        for i in (self.x0..self.x1).rev() {
            out.push((i, self.y1));
        }
        for j in (self.y0 + 1..self.y1).rev() {
            out.push((self.x0, j));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClothSpec {
    pub node_density: usize,
    pub width: f64,
    pub height: f64,
    pub num_holes: usize,
    pub holes: Vec<HoleSpec>,
}

impl ClothSpec {
    /// The single-hole cloth used for the fixed-geometry experiments.
    pub fn fixed() -> Self {
        Self {
            node_density: 25,
            width: 1.0,
            height: 1.0,
            num_holes: 1,
            holes: vec![HoleSpec {
                x0: 8,
                y0: 9,
                x1: 16,
                y1: 13,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.node_density;
        let bad = |msg: String| Err(SimError::InvalidCloth(msg));
        if n < 5 {
            return bad(format!("node_density {n} is too small"));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return bad(format!("non-positive size {}x{}", self.width, self.height));
        }
        if self.num_holes != self.holes.len() {
            return bad(format!(
                "num_holes is {} but {} holes listed",
                self.num_holes,
                self.holes.len()
            ));
        }
        for (k, h) in self.holes.iter().enumerate() {
            check_hole(h, n).map_err(|m| SimError::InvalidCloth(format!("hole {k}: {m}")))?;
        }
        for a in 0..self.holes.len() {
            for b in a + 1..self.holes.len() {
                if self.holes[a].overlaps(&self.holes[b]) {
                    return bad(format!("holes {a} and {b} overlap"));
                }
            }
        }
        Ok(())
    }
}

/// Boundary check for one hole on an `n`-wide grid.
fn check_hole(h: &HoleSpec, n: usize) -> std::result::Result<(), String> {
    if h.x0 < 2 || h.x0 > n - 2 || h.y0 < 2 || h.y0 > n - 2 {
        return Err(format!(
            "corner ({}, {}) outside [2, {}]",
            h.x0,
            h.y0,
            n - 2
        ));
    }
    if h.x1 > n - 1 || h.y1 > n - 1 {
        return Err(format!("corner ({}, {}) outside the grid", h.x1, h.y1));
    }
    if h.x1 < h.x0 + 2 || h.y1 < h.y0 + 2 {
        return Err("hole has no interior vertex".into());
    }
    Ok(())
}

/// Monte-Carlo cloth generation: corners and extents are drawn uniformly and
/// the whole hole set is resampled until it passes the boundary and overlap
/// checks.
pub fn generate_cloth<R: Rng + ?Sized>(rng: &mut R, num_holes: usize) -> Result<ClothSpec> {
    if !(1..=2).contains(&num_holes) {
        return Err(SimError::InvalidCloth(format!(
            "num_holes must be 1 or 2, got {num_holes}"
        )));
    }
    let n = DEFAULT_NODE_DENSITY;
    let width = rng.gen_range(SIZE_RANGE.0..=SIZE_RANGE.1);
    let height = rng.gen_range(SIZE_RANGE.0..=SIZE_RANGE.1);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let holes: Vec<HoleSpec> = (0..num_holes)
            .map(|_| {
                let x0 = rng.gen_range(2..=n - 2);
                let y0 = rng.gen_range(2..=n - 2);
                let w = rng.gen_range(HOLE_EXTENT_RANGE.0..=HOLE_EXTENT_RANGE.1);
                let h = rng.gen_range(HOLE_EXTENT_RANGE.0..=HOLE_EXTENT_RANGE.1);
                HoleSpec {
                    x0,
                    y0,
                    x1: x0 + w,
                    y1: y0 + h,
                }
            })
            .collect();
        let spec = ClothSpec {
            node_density: n,
            width,
            height,
            num_holes,
            holes,
        };
        if spec.validate().is_ok() {
            return Ok(spec);
        }
    }
    Err(SimError::GenerationFailed(MAX_GENERATION_ATTEMPTS))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpringKind {
    Structural,
    Shear,
    Bend,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spring {
    pub a: usize,
    pub b: usize,
    pub rest: f64,
    pub kind: SpringKind,
}

/// Cloth mesh in its initial world placement.
#[derive(Clone, Debug)]
pub struct ClothMesh {
    pub spec: ClothSpec,
    pub positions: Vec<Vec3>,
    pub springs: Vec<Spring>,
    /// Grid coordinates of every surviving vertex.
    pub grid: Vec<(usize, usize)>,
    /// Vertex id for each grid cell, `None` where a hole removed it.
    pub grid_to_vertex: Vec<Option<usize>>,
    pub loops: Vec<Vec<usize>>,
    pub gripper_vertices: [usize; 2],
}

impl ClothMesh {
    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn vertex_at(&self, i: usize, j: usize) -> Option<usize> {
        let n = self.spec.node_density;
        if i >= n || j >= n {
            return None;
        }
        self.grid_to_vertex[j * n + i]
    }
}

/// Position of grid vertex `(i, j)` in the cloth's local frame, before the
/// placement rotation. The sheet spans the local y-z plane around the origin.
fn local_position(spec: &ClothSpec, i: usize, j: usize) -> Vec3 {
    let d = (spec.node_density - 1) as f64;
    let u = (i as f64 / d - 0.5) * spec.width;
    let w = (0.5 - j as f64 / d) * spec.height;
    [0.0, -w, u]
}

pub fn build_mesh(spec: &ClothSpec) -> Result<ClothMesh> {
    spec.validate()?;
    let n = spec.node_density;
    let removed = |i: usize, j: usize| spec.holes.iter().any(|h| h.contains_strictly(i, j));
    let rot = geom::euler_xyz(CLOTH_EULER[0], CLOTH_EULER[1], CLOTH_EULER[2]);

    let mut grid_to_vertex = vec![None; n * n];
    let mut positions = Vec::new();
    let mut grid = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if removed(i, j) {
                continue;
            }
            grid_to_vertex[j * n + i] = Some(positions.len());
            let p = geom::mat_vec(&rot, local_position(spec, i, j));
            positions.push(geom::add(p, CLOTH_POSITION));
            grid.push((i, j));
        }
    }

    let at = |i: isize, j: isize| -> Option<usize> {
        if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
            None
        } else {
            grid_to_vertex[j as usize * n + i as usize]
        }
    };
    let mut springs = Vec::new();
    let offsets: [(isize, isize, SpringKind); 6] = [
        (1, 0, SpringKind::Structural),
        (0, 1, SpringKind::Structural),
        (1, 1, SpringKind::Shear),
        (1, -1, SpringKind::Shear),
        (2, 0, SpringKind::Bend),
        (0, 2, SpringKind::Bend),
    ];
    for (a, &(i, j)) in grid.iter().enumerate() {
        let (i, j) = (i as isize, j as isize);
        for &(di, dj, kind) in &offsets {
            let Some(b) = at(i + di, j + dj) else {
                continue;
            };
            // Bend springs do not bridge a removed vertex.
            if kind == SpringKind::Bend && at(i + di / 2, j + dj / 2).is_none() {
                continue;
            }
            springs.push(Spring {
                a,
                b,
                rest: geom::dist(positions[a], positions[b]),
                kind,
            });
        }
    }

    let loops = spec
        .holes
        .iter()
        .map(|h| {
            h.perimeter()
                .into_iter()
                .map(|(i, j)| grid_to_vertex[j * n + i].expect("hole boundary survives"))
                .collect()
        })
        .collect();
    let gripper_vertices = [
        grid_to_vertex[0].expect("corner survives"),
        grid_to_vertex[n - 1].expect("corner survives"),
    ];
    Ok(ClothMesh {
        spec: spec.clone(),
        positions,
        springs,
        grid,
        grid_to_vertex,
        loops,
        gripper_vertices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixed_cloth_is_valid() {
        ClothSpec::fixed().validate().unwrap();
    }

    #[test]
    fn hole_at_left_edge_rejected() {
        let mut s = ClothSpec::fixed();
        s.holes[0] = HoleSpec {
            x0: 0,
            y0: 9,
            x1: 6,
            y1: 13,
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn identical_holes_overlap() {
        let mut s = ClothSpec::fixed();
        s.holes.push(s.holes[0]);
        s.num_holes = 2;
        assert!(matches!(s.validate(), Err(SimError::InvalidCloth(m)) if m.contains("overlap")));
    }

    #[test]
    fn full_grid_has_625_vertices() {
        let mut s = ClothSpec::fixed();
        s.holes.clear();
        s.num_holes = 0;
        assert_eq!(build_mesh(&s).unwrap().num_vertices(), 625);
    }

    #[test]
    fn grippers_on_top_corners() {
        let m = build_mesh(&ClothSpec::fixed()).unwrap();
        let [a, b] = m.gripper_vertices;
        assert_eq!(m.grid[a], (0, 0));
        assert_eq!(m.grid[b], (24, 0));
        assert!((m.positions[a][2] - 8.5).abs() < 1e-12);
        assert!((m.positions[a][0] + 0.5).abs() < 1e-12);
        assert!((m.positions[b][0] - 0.5).abs() < 1e-12);
        assert!((m.positions[a][1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn generated_cloths_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 0..200 {
            let s = generate_cloth(&mut rng, 1 + k % 2).unwrap();
            s.validate().unwrap();
            assert!(s.width >= 0.8 && s.width <= 1.2);
        }
    }
}
