//! Episode rollouts: settle, manipulation, release.

use serde::{Deserialize, Serialize};

use crate::anchor::AnchorSpec;
use crate::cloth::ClothMesh;
use crate::control::{gripper_forces, PdGains};
use crate::error::Result;
use crate::geom::Vec3;
use crate::physics::{SimParams, SimState, Simulator};
use crate::policy::{Policy, PolicyParams};
use crate::success::{success_check, HoleCheck, POLYGON_TOLERANCE};

pub const SIM_STEPS_PER_ENV_STEP: usize = 8;
pub const RELEASE_STEPS: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub sim: SimParams,
    pub pd: PdGains,
    pub policy: PolicyParams,
    /// Simulation steps with the grippers held still before the scene is
    /// observed, so the cloth starts from a hanging rest state.
    pub settle_steps: usize,
    pub manipulation_steps: usize,
    pub sim_steps_per_env_step: usize,
    pub release_steps: usize,
    pub polygon_tolerance: f64,
    /// Keep a copy of the cloth every this many simulation steps.
    pub record_every: Option<usize>,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            sim: SimParams::default(),
            pd: PdGains::default(),
            policy: PolicyParams::default(),
            settle_steps: 480,
            manipulation_steps: 400,
            sim_steps_per_env_step: SIM_STEPS_PER_ENV_STEP,
            release_steps: RELEASE_STEPS,
            polygon_tolerance: POLYGON_TOLERANCE,
            record_every: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub pre_release: Vec<Vec3>,
    pub post_release: Vec<Vec3>,
    pub holes: Vec<HoleCheck>,
    pub success: bool,
    pub manipulation_sim_steps: usize,
    pub release_sim_steps: usize,
    #[serde(skip)]
    pub frames: Vec<Vec<Vec3>>,
}

/// A scene after the settle phase, ready for a policy.
#[derive(Clone, Debug)]
pub struct Episode {
    pub sim: Simulator,
    pub anchor: AnchorSpec,
    pub loops: Vec<Vec<usize>>,
    pub config: EpisodeConfig,
    frames: Vec<Vec<Vec3>>,
}

impl Episode {
    pub fn settle(mesh: &ClothMesh, anchor: &AnchorSpec, config: &EpisodeConfig) -> Result<Self> {
        let colliders = anchor.capsules().to_vec();
        let mut sim = Simulator::new(mesh, colliders, config.sim.clone());
        let hold = vec![[0.0; 3]; sim.state.grippers.len()];
        for _ in 0..config.settle_steps {
            sim.step(&hold)?;
        }
        Ok(Self {
            sim,
            anchor: *anchor,
            loops: mesh.loops.clone(),
            config: config.clone(),
            frames: Vec::new(),
        })
    }

    pub fn state(&self) -> &SimState {
        &self.sim.state
    }

    /// Cloth vertices as observed before any manipulation.
    pub fn initial_cloud(&self) -> Vec<Vec3> {
        self.sim.state.positions.clone()
    }

    fn step_recorded(&mut self, forces: &[Vec3], counter: &mut usize) -> Result<()> {
        self.sim.step(forces)?;
        *counter += 1;
        if let Some(k) = self.config.record_every {
            if k > 0 && self.sim.state.steps.is_multiple_of(k) {
                self.frames.push(self.sim.state.positions.clone());
            }
        }
        Ok(())
    }

    /// Runs the manipulation phase under `policy`, then the release phase,
    /// and scores the outcome.
    pub fn run(mut self, policy: &mut dyn Policy) -> Result<EpisodeResult> {
        let mut manip = 0;
        for _ in 0..self.config.manipulation_steps {
            let targets = policy.targets(&self.sim.state);
            for _ in 0..self.config.sim_steps_per_env_step {
                let forces = gripper_forces(&self.config.pd, &self.sim.state.grippers, &targets);
                self.step_recorded(&forces, &mut manip)?;
            }
        }
        let pre_release = self.sim.state.positions.clone();
        self.sim.release();
        let mut release = 0;
        for _ in 0..self.config.release_steps {
            self.step_recorded(&[], &mut release)?;
        }
        let post_release = self.sim.state.positions.clone();
        let report = success_check(
            &pre_release,
            &post_release,
            &self.loops,
            self.anchor.goal(),
            self.config.polygon_tolerance,
        );
        Ok(EpisodeResult {
            pre_release,
            post_release,
            holes: report.holes,
            success: report.success,
            manipulation_sim_steps: manip,
            release_sim_steps: release,
            frames: self.frames,
        })
    }
}
