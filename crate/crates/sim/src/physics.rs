//! Mass-spring cloth dynamics with semi-implicit Euler integration, penalty
//! contacts against the hanger capsules and the ground, and two floating
//! grippers that carry pinned cloth vertices.

use serde::{Deserialize, Serialize};

use crate::anchor::Capsule;
use crate::cloth::{ClothMesh, Spring, SpringKind};
use crate::error::{Result, SimError};
use crate::geom::{self, Vec3};

/// Calibration constants. All of them are tunable; none is a measured
/// material property.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub particle_mass: f64,
    pub k_structural: f64,
    pub k_shear: f64,
    pub k_bend: f64,
    /// Velocity multiplier applied once per simulation step (spread evenly
    /// over the substeps).
    pub damping: f64,
    pub dt: f64,
    pub substeps: usize,
    pub contact_stiffness: f64,
    /// Cloth half-thickness added to every collider radius.
    pub contact_margin: f64,
    pub gravity: f64,
    pub ground: bool,
    pub gripper_mass: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            particle_mass: 0.01,
            k_structural: 800.0,
            k_shear: 400.0,
            k_bend: 200.0,
            damping: 0.98,
            dt: 1.0 / 240.0,
            substeps: 8,
            contact_stiffness: 10_000.0,
            contact_margin: 0.01,
            gravity: -9.81,
            ground: true,
            gripper_mass: 0.5,
        }
    }
}

impl SimParams {
    fn stiffness(&self, kind: SpringKind) -> f64 {
        match kind {
            SpringKind::Structural => self.k_structural,
            SpringKind::Shear => self.k_shear,
            SpringKind::Bend => self.k_bend,
        }
    }
}

/// Gravity-compensated point mass driven by an external force. While
/// attached, its cloth vertex copies its position and velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gripper {
    pub position: Vec3,
    pub velocity: Vec3,
    pub vertex: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Manipulation,
    Release,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub grippers: Vec<Gripper>,
    pub phase: Phase,
    pub steps: usize,
}

impl SimState {
    pub fn time(&self, params: &SimParams) -> f64 {
        self.steps as f64 * params.dt
    }

    pub fn pinned(&self) -> Vec<usize> {
        match self.phase {
            Phase::Manipulation => self.grippers.iter().map(|g| g.vertex).collect(),
            Phase::Release => Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Simulator {
    pub params: SimParams,
    pub springs: Vec<Spring>,
    pub colliders: Vec<Capsule>,
    pub state: SimState,
    stiffness: Vec<f64>,
}

impl Simulator {
    /// Cloth at rest in its initial placement with a gripper on each of the
    /// mesh's gripper vertices.
    pub fn new(mesh: &ClothMesh, colliders: Vec<Capsule>, params: SimParams) -> Self {
        let grippers = mesh
            .gripper_vertices
            .iter()
            .map(|&v| Gripper {
                position: mesh.positions[v],
                velocity: [0.0; 3],
                vertex: v,
            })
            .collect();
        let state = SimState {
            positions: mesh.positions.clone(),
            velocities: vec![[0.0; 3]; mesh.positions.len()],
            grippers,
            phase: Phase::Manipulation,
            steps: 0,
        };
        Self::from_parts(params, mesh.springs.clone(), colliders, state)
    }

    pub fn from_parts(
        params: SimParams,
        springs: Vec<Spring>,
        colliders: Vec<Capsule>,
        state: SimState,
    ) -> Self {
        let stiffness = springs.iter().map(|s| params.stiffness(s.kind)).collect();
        Self {
            params,
            springs,
            colliders,
            state,
            stiffness,
        }
    }

    /// Detaches the grippers from the cloth.
    pub fn release(&mut self) {
        self.state.phase = Phase::Release;
    }

    /// Advances one simulation step of length `params.dt`. `forces` holds one
    /// control force per gripper, held constant over the step; it is ignored
    /// after release.
    pub fn step(&mut self, forces: &[Vec3]) -> Result<()> {
        let p = &self.params;
        let n_sub = p.substeps.max(1);
        let h = p.dt / n_sub as f64;
        let damp = p.damping.powf(1.0 / n_sub as f64);
        let inv_m = 1.0 / p.particle_mass;
        let inv_gm = 1.0 / p.gripper_mass;
        let pinned = self.state.phase == Phase::Manipulation;
        let mut acc = vec![[0.0; 3]; self.state.positions.len()];

        for _ in 0..n_sub {
            if pinned {
                for (g, f) in self.state.grippers.iter_mut().zip(forces) {
                    g.velocity = geom::add(g.velocity, geom::scale(*f, h * inv_gm));
                    g.position = geom::add(g.position, geom::scale(g.velocity, h));
                }
            }
            self.accumulate_forces(&mut acc);
            let st = &mut self.state;
            for ((x, v), a) in st.positions.iter_mut().zip(&mut st.velocities).zip(&acc) {
                for k in 0..3 {
                    v[k] = (v[k] + h * a[k] * inv_m) * damp;
                    x[k] += h * v[k];
                }
            }
            if pinned {
                for g in &st.grippers {
                    st.positions[g.vertex] = g.position;
                    st.velocities[g.vertex] = g.velocity;
                }
            }
        }
        self.state.steps += 1;
        if let Some(vertex) = self
            .state
            .positions
            .iter()
            .zip(&self.state.velocities)
            .position(|(x, v)| !x.iter().chain(v.iter()).all(|c| c.is_finite()))
        {
            return Err(SimError::Diverged {
                step: self.state.steps,
                vertex,
            });
        }
        Ok(())
    }

    /// Total force on every particle at the current state.
    fn accumulate_forces(&self, acc: &mut [Vec3]) {
        let p = &self.params;
        let x = &self.state.positions;
        let g = p.gravity * p.particle_mass;
        for a in acc.iter_mut() {
            *a = [0.0, 0.0, g];
        }
        for (s, &k) in self.springs.iter().zip(&self.stiffness) {
            let d = geom::sub(x[s.b], x[s.a]);
            let len = geom::norm(d);
            if len < 1e-12 {
                continue;
            }
            let f = geom::scale(d, k * (len - s.rest) / len);
            acc[s.a] = geom::add(acc[s.a], f);
            acc[s.b] = geom::sub(acc[s.b], f);
        }
        let kc = p.contact_stiffness;
        for (xi, a) in x.iter().zip(acc.iter_mut()) {
            for c in &self.colliders {
                let (d, n) = c.distance(*xi);
                let pen = p.contact_margin - d;
                if pen > 0.0 {
                    *a = geom::add(*a, geom::scale(n, kc * pen));
                }
            }
            if p.ground && xi[2] < 0.0 {
                a[2] -= kc * xi[2];
            }
        }
    }

    /// Kinetic + gravitational + elastic + contact energy of the cloth.
    pub fn energy(&self) -> f64 {
        let p = &self.params;
        let x = &self.state.positions;
        let m = p.particle_mass;
        let mut e = 0.0;
        for (xi, vi) in x.iter().zip(&self.state.velocities) {
            e += 0.5 * m * geom::dot(*vi, *vi) - m * p.gravity * xi[2];
        }
        for (s, &k) in self.springs.iter().zip(&self.stiffness) {
            let ext = geom::dist(x[s.a], x[s.b]) - s.rest;
            e += 0.5 * k * ext * ext;
        }
        for xi in x {
            for c in &self.colliders {
                let pen = p.contact_margin - c.distance(*xi).0;
                if pen > 0.0 {
                    e += 0.5 * p.contact_stiffness * pen * pen;
                }
            }
            if p.ground && xi[2] < 0.0 {
                e += 0.5 * p.contact_stiffness * xi[2] * xi[2];
            }
        }
        e
    }
}
