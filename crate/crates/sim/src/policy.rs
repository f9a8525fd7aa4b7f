//! Gripper target policies.
//!
//! Both policies share the same two-stage motion. The grippers first travel
//! to a standoff pose offset from the final targets along the cloth normal,
//! on the side the cloth starts from, and then move straight in. Without the
//! standoff the cloth sweeps sideways into the bar instead of threading the
//! hole onto it.

use serde::{Deserialize, Serialize};

use crate::anchor::AnchorSpec;
use crate::error::{Result, SimError};
use crate::geom::{self, Vec3};
use crate::physics::SimState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    /// Offset of the approach waypoint from the final targets.
    pub standoff: f64,
    /// Both grippers within this distance of the waypoint ends the approach.
    pub switch_tolerance: f64,
    /// Gain on the loop-centroid error added to the expert's targets.
    pub correction_gain: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            standoff: 0.6,
            switch_tolerance: 0.03,
            correction_gain: 1.0,
        }
    }
}

pub trait Policy {
    /// Gripper targets for the next environment step.
    fn targets(&mut self, state: &SimState) -> Vec<Vec3>;
}

#[derive(Clone, Debug)]
pub struct Approach {
    pub final_targets: Vec<Vec3>,
    pub waypoints: Vec<Vec3>,
    inserting: bool,
    tolerance: f64,
}

impl Approach {
    pub fn new(final_targets: Vec<Vec3>, state: &SimState, params: &PolicyParams) -> Self {
        let cloth_c = geom::centroid(&state.positions).unwrap_or([0.0; 3]);
        let mid = geom::centroid(&final_targets).unwrap_or(cloth_c);
        let span = if final_targets.len() >= 2 {
            geom::sub(final_targets[1], final_targets[0])
        } else {
            [0.0; 3]
        };
        let toward_cloth = geom::sub(cloth_c, mid);
        let normal = geom::normalize(geom::cross(span, [0.0, 0.0, 1.0]))
            .or_else(|| geom::normalize([toward_cloth[0], toward_cloth[1], 0.0]))
            .unwrap_or([0.0, 1.0, 0.0]);
        let normal = if geom::dot(normal, toward_cloth) < 0.0 {
            geom::scale(normal, -1.0)
        } else {
            normal
        };
        let offset = geom::scale(normal, params.standoff);
        let waypoints: Vec<Vec3> = final_targets
            .iter()
            .map(|t| geom::add(*t, offset))
            .collect();
        // Already next to the targets: go straight there.
        let near = state
            .grippers
            .iter()
            .zip(&final_targets)
            .all(|(g, t)| geom::dist(g.position, *t) <= params.standoff);
        Self {
            final_targets,
            waypoints,
            inserting: near,
            tolerance: params.switch_tolerance,
        }
    }

    pub fn inserting(&self) -> bool {
        self.inserting
    }

    /// Current stage targets, switching to insertion once the waypoint is
    /// reached.
    pub fn update(&mut self, state: &SimState) -> &[Vec3] {
        if !self.inserting {
            let reached = state
                .grippers
                .iter()
                .zip(&self.waypoints)
                .all(|(g, w)| geom::dist(g.position, *w) < self.tolerance);
            if reached {
                self.inserting = true;
            }
        }
        if self.inserting {
            &self.final_targets
        } else {
            &self.waypoints
        }
    }
}

/// Privileged demonstrator: aligns the chosen hole's loop centroid with the
/// goal, rotating the grasp layout with the anchor.
#[derive(Clone, Debug)]
pub struct PseudoExpert {
    approach: Approach,
    goal: Vec3,
    loop_vertices: Vec<usize>,
    gain: f64,
}

impl PseudoExpert {
    pub fn new(
        state: &SimState,
        anchor: &AnchorSpec,
        loop_vertices: &[usize],
        params: &PolicyParams,
    ) -> Result<Self> {
        let n = state.positions.len();
        if let Some(&bad) = loop_vertices.iter().find(|&&v| v >= n) {
            return Err(SimError::BadIndex { index: bad, len: n });
        }
        let goal = anchor.goal();
        let c0 = loop_centroid(state, loop_vertices);
        let finals = state
            .grippers
            .iter()
            .map(|g| {
                let rel = geom::rot_z(anchor.pose.rotation_z, geom::sub(g.position, c0));
                geom::add(goal, rel)
            })
            .collect();
        Ok(Self {
            approach: Approach::new(finals, state, params),
            goal,
            loop_vertices: loop_vertices.to_vec(),
            gain: params.correction_gain,
        })
    }

    pub fn final_targets(&self) -> &[Vec3] {
        &self.approach.final_targets
    }

    /// Shift added to the final targets for the current loop centroid.
    pub fn correction(&self, state: &SimState) -> Vec3 {
        let c = loop_centroid(state, &self.loop_vertices);
        geom::scale(geom::sub(self.goal, c), self.gain)
    }
}

impl Policy for PseudoExpert {
    fn targets(&mut self, state: &SimState) -> Vec<Vec3> {
        let base = self.approach.update(state).to_vec();
        if !self.approach.inserting() {
            return base;
        }
        let corr = self.correction(state);
        base.into_iter().map(|t| geom::add(t, corr)).collect()
    }
}

fn loop_centroid(state: &SimState, loop_vertices: &[usize]) -> Vec3 {
    let pts: Vec<Vec3> = loop_vertices.iter().map(|&v| state.positions[v]).collect();
    geom::centroid(&pts).unwrap_or([0.0; 3])
}

/// Targets read off a predicted cloth cloud at the gripper vertices.
pub fn evaluation_targets(prediction: &[Vec3], gripper_vertices: &[usize]) -> Result<Vec<Vec3>> {
    gripper_vertices
        .iter()
        .map(|&v| {
            prediction.get(v).copied().ok_or(SimError::BadIndex {
                index: v,
                len: prediction.len(),
            })
        })
        .collect()
}

/// Goal-conditioned policy driven by a predicted goal cloud.
#[derive(Clone, Debug)]
pub struct EvalPolicy {
    approach: Approach,
}

impl EvalPolicy {
    pub fn new(
        state: &SimState,
        prediction: &[Vec3],
        gripper_vertices: &[usize],
        params: &PolicyParams,
    ) -> Result<Self> {
        if prediction.len() != state.positions.len() {
            return Err(SimError::PredictionLength {
                got: prediction.len(),
                expected: state.positions.len(),
            });
        }
        let finals = evaluation_targets(prediction, gripper_vertices)?;
        Ok(Self {
            approach: Approach::new(finals, state, params),
        })
    }
}

impl Policy for EvalPolicy {
    fn targets(&mut self, state: &SimState) -> Vec<Vec3> {
        self.approach.update(state).to_vec()
    }
}

/// Keeps the grippers where they are.
#[derive(Clone, Debug, Default)]
pub struct HoldPolicy;

impl Policy for HoldPolicy {
    fn targets(&mut self, state: &SimState) -> Vec<Vec3> {
        state.grippers.iter().map(|g| g.position).collect()
    }
}
