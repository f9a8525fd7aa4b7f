use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::physics::Gripper;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
    /// Per-axis force limit.
    pub max_force: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self {
            kp: 50.0,
            kd: 50.0,
            max_force: 5.0,
        }
    }
}

/// PD force toward `target` with zero target velocity, clamped per axis.
pub fn pd_control(gains: &PdGains, position: Vec3, velocity: Vec3, target: Vec3) -> Vec3 {
    let mut f = [0.0; 3];
    for k in 0..3 {
        let raw = gains.kp * (target[k] - position[k]) - gains.kd * velocity[k];
        f[k] = raw.clamp(-gains.max_force, gains.max_force);
    }
    f
}

pub fn gripper_forces(gains: &PdGains, grippers: &[Gripper], targets: &[Vec3]) -> Vec<Vec3> {
    grippers
        .iter()
        .zip(targets)
        .map(|(g, t)| pd_control(gains, g.position, g.velocity, *t))
        .collect()
}
