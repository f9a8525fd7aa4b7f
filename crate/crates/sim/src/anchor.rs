//! The rigid hanger: a tall vertical rod with a short horizontal bar at the
//! top. The cloth is hung by threading one of its holes onto the bar.

use std::f64::consts::{FRAC_PI_3, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{self, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Training poses. Same distribution as `Unseen`.
    Train,
    Unseen,
    Ood,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Train => "train",
            Regime::Unseen => "unseen",
            Regime::Ood => "ood",
        })
    }
}

impl FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Regime::Train),
            "unseen" => Ok(Regime::Unseen),
            "ood" | "unseen-ood" => Ok(Regime::Ood),
            other => Err(format!("unknown regime '{other}' (train, unseen, ood)")),
        }
    }
}

/// Translation plus rotation about the world z axis through the anchor origin
/// (the foot of the rod).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorPose {
    pub translation: Vec3,
    pub rotation_z: f64,
}

impl AnchorPose {
    pub const IDENTITY: AnchorPose = AnchorPose {
        translation: [0.0; 3],
        rotation_z: 0.0,
    };

    pub fn apply(&self, p: Vec3) -> Vec3 {
        geom::add(geom::rot_z(self.rotation_z, p), self.translation)
    }
}

pub fn sample_anchor_pose<R: Rng + ?Sized>(rng: &mut R, regime: Regime) -> AnchorPose {
    let rotation_z = rng.gen_range(-FRAC_PI_3..FRAC_PI_3);
    let sign = if rotation_z >= 0.0 { 1.0 } else { -1.0 };
    let (x_mag, z) = match regime {
        Regime::Train | Regime::Unseen => (rng.gen_range(0.0..5.0), 0.0),
        Regime::Ood => {
            let x = loop {
                let x = rng.gen_range(5.0..10.0);
                if x > 5.0 {
                    break x;
                }
            };
            let z = loop {
                let z = rng.gen_range(1.0..5.0);
                if z > 1.0 {
                    break z;
                }
            };
            (x, z)
        }
    };
    let y = loop {
        let y = rng.gen_range(-10.0..0.0);
        if y > -10.0 {
            break y;
        }
    };
    AnchorPose {
        translation: [sign * x_mag, y, z],
        rotation_z,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

impl Capsule {
    /// Signed distance from `p` to the capsule surface and the outward normal
    /// at the closest point.
    pub fn distance(&self, p: Vec3) -> (f64, Vec3) {
        let c = geom::closest_on_segment(p, self.a, self.b);
        let d = geom::sub(p, c);
        let len = geom::norm(d);
        let n = if len > 1e-12 {
            geom::scale(d, 1.0 / len)
        } else {
            [0.0, 0.0, 1.0]
        };
        (len - self.radius, n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorGeometry {
    pub rod_height: f64,
    pub rod_radius: f64,
    pub bar_length: f64,
    pub bar_radius: f64,
    /// Height of the rod section, below the bar, that appears in the
    /// observed anchor cloud.
    pub visible_rod: f64,
}

impl Default for AnchorGeometry {
    fn default() -> Self {
        Self {
            rod_height: 8.0,
            rod_radius: 0.05,
            bar_length: 0.6,
            bar_radius: 0.03,
            visible_rod: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorSpec {
    pub geometry: AnchorGeometry,
    pub pose: AnchorPose,
}

impl AnchorSpec {
    pub fn new(pose: AnchorPose) -> Self {
        Self {
            geometry: AnchorGeometry::default(),
            pose,
        }
    }

    /// Rod and bar in world coordinates.
    pub fn capsules(&self) -> [Capsule; 2] {
        let g = &self.geometry;
        let top = [0.0, 0.0, g.rod_height];
        let tip = [0.0, g.bar_length, g.rod_height];
        [
            Capsule {
                a: self.pose.apply([0.0; 3]),
                b: self.pose.apply(top),
                radius: g.rod_radius,
            },
            Capsule {
                a: self.pose.apply(top),
                b: self.pose.apply(tip),
                radius: g.bar_radius,
            },
        ]
    }

    /// Midpoint of the bar.
    pub fn goal(&self) -> Vec3 {
        let g = &self.geometry;
        self.pose.apply([0.0, 0.5 * g.bar_length, g.rod_height])
    }

    /// Unit vector along the bar, from the rod to the free tip.
    pub fn bar_direction(&self) -> Vec3 {
        geom::rot_z(self.pose.rotation_z, [0.0, 1.0, 0.0])
    }

    /// Points sampled uniformly (by area) on the bar and the visible top
    /// section of the rod, in world coordinates.
    pub fn sample_cloud<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<Vec3> {
        let g = &self.geometry;
        let bar_area = g.bar_radius * g.bar_length;
        let rod_area = g.rod_radius * g.visible_rod;
        let p_bar = bar_area / (bar_area + rod_area);
        (0..count)
            .map(|_| {
                let on_bar = rng.gen::<f64>() < p_bar;
                let phi = rng.gen_range(0.0..TAU);
                let s: f64 = rng.gen();
                let (sp, cp) = phi.sin_cos();
                let local = if on_bar {
                    [
                        g.bar_radius * cp,
                        s * g.bar_length,
                        g.rod_height + g.bar_radius * sp,
                    ]
                } else {
                    [
                        g.rod_radius * cp,
                        g.rod_radius * sp,
                        g.rod_height - s * g.visible_rod,
                    ]
                };
                self.pose.apply(local)
            })
            .collect()
    }
}
