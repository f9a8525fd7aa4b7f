//! Frame transforms applied before the network and undone after it.

use xdisp_sim::geom::{self, Vec3};

use crate::error::{CoreError, Result};
use crate::model::{Frame, Target, Variant};

/// Arithmetic means of the action and anchor clouds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameInfo {
    pub action_mean: Vec3,
    pub anchor_mean: Vec3,
}

pub fn mean(points: &[Vec3], what: &'static str) -> Result<Vec3> {
    geom::centroid(points).ok_or(CoreError::Empty(what))
}

fn shift(points: &[Vec3], by: Vec3) -> Vec<Vec3> {
    points.iter().map(|p| geom::sub(*p, by)).collect()
}

/// Object-centric frames for a demonstration: `(P'_A, P'_B, dX*', info)`
/// with the action centered on its own mean and the anchor and goal on the
/// anchor mean.
pub fn center_frames(
    p_a: &[Vec3],
    p_a_goal: &[Vec3],
    p_b: &[Vec3],
) -> Result<(Vec<Vec3>, Vec<Vec3>, Vec<Vec3>, FrameInfo)> {
    let info = FrameInfo {
        action_mean: mean(p_a, "action cloud")?,
        anchor_mean: mean(p_b, "anchor cloud")?,
    };
    let a = shift(p_a, info.action_mean);
    let b = shift(p_b, info.anchor_mean);
    let goal = shift(p_a_goal, info.anchor_mean);
    let d = super::displacements(&a, &goal)?;
    Ok((a, b, d, info))
}

/// Offsets subtracted from each cloud for one variant's frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneFrame {
    pub action_origin: Vec3,
    pub anchor_origin: Vec3,
    /// Origin of the goal cloud; added back when decoding.
    pub goal_origin: Vec3,
}

impl SceneFrame {
    pub fn new(frame: Frame, p_a: &[Vec3], p_b: &[Vec3]) -> Result<Self> {
        let a = mean(p_a, "action cloud")?;
        let b = mean(p_b, "anchor cloud")?;
        Ok(match frame {
            Frame::Object => Self {
                action_origin: a,
                anchor_origin: b,
                goal_origin: b,
            },
            Frame::World => Self {
                action_origin: [0.0; 3],
                anchor_origin: [0.0; 3],
                goal_origin: [0.0; 3],
            },
            Frame::Scene => {
                let (na, nb) = (p_a.len() as f64, p_b.len() as f64);
                let c = geom::scale(
                    geom::add(geom::scale(a, na), geom::scale(b, nb)),
                    1.0 / (na + nb),
                );
                Self {
                    action_origin: c,
                    anchor_origin: c,
                    goal_origin: c,
                }
            }
        })
    }

    pub fn action(&self, p_a: &[Vec3]) -> Vec<Vec3> {
        shift(p_a, self.action_origin)
    }

    pub fn anchor(&self, p_b: &[Vec3]) -> Vec<Vec3> {
        shift(p_b, self.anchor_origin)
    }

    /// Network target for a world-frame goal cloud.
    pub fn target(&self, target: Target, p_a: &[Vec3], p_a_goal: &[Vec3]) -> Result<Vec<Vec3>> {
        let goal = shift(p_a_goal, self.goal_origin);
        match target {
            Target::Position => Ok(goal),
            Target::Displacement => super::displacements(&self.action(p_a), &goal),
        }
    }

    /// World-frame goal cloud from a network output.
    pub fn decode(&self, target: Target, p_a: &[Vec3], out: &[Vec3]) -> Result<Vec<Vec3>> {
        if out.len() != p_a.len() {
            return Err(CoreError::Shape {
                op: "decode",
                expected: vec![p_a.len(), 3],
                got: vec![out.len(), 3],
            });
        }
        let base: Vec<Vec3> = match target {
            Target::Position => out.to_vec(),
            Target::Displacement => self
                .action(p_a)
                .iter()
                .zip(out)
                .map(|(a, d)| geom::add(*a, *d))
                .collect(),
        };
        Ok(base
            .iter()
            .map(|p| geom::add(*p, self.goal_origin))
            .collect())
    }
}

/// Network-ready clouds and target for one variant.
#[derive(Clone, Debug, PartialEq)]
pub struct Framed {
    pub frame: SceneFrame,
    pub action: Vec<Vec3>,
    pub anchor: Vec<Vec3>,
    pub target: Vec<Vec3>,
}

pub fn frame_example(
    variant: Variant,
    p_a: &[Vec3],
    p_a_goal: &[Vec3],
    p_b: &[Vec3],
) -> Result<Framed> {
    let frame = SceneFrame::new(variant.frame(), p_a, p_b)?;
    Ok(Framed {
        action: frame.action(p_a),
        anchor: frame.anchor(p_b),
        target: frame.target(variant.target(), p_a, p_a_goal)?,
        frame,
    })
}

/// Rotates `points` about the vertical axis through `center`.
pub fn rotate_about(points: &[Vec3], center: Vec3, theta: f64) -> Vec<Vec3> {
    points
        .iter()
        .map(|p| {
            // Added as a delta so theta = 0 returns the input bit for bit.
            let r = geom::sub(*p, center);
            geom::add(*p, geom::sub(geom::rot_z(theta, r), r))
        })
        .collect()
}

/// Rotates a cloud about the vertical axis through its own centroid.
pub fn augment_zrot(points: &[Vec3], theta: f64) -> Vec<Vec3> {
    match geom::centroid(points) {
        Some(c) => rotate_about(points, c, theta),
        None => Vec::new(),
    }
}
