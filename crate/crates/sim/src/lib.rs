//! Cloth-hanging benchmark: procedural cloth with holes, a rigid hanger,
//! mass-spring dynamics, PD-driven grippers, scripted and goal-conditioned
//! policies, and the success predicates used to score rollouts.

pub mod anchor;
pub mod cloth;
pub mod control;
pub mod episode;
mod error;
pub mod geom;
pub mod physics;
pub mod policy;
pub mod scenario;
pub mod success;

pub use anchor::{sample_anchor_pose, AnchorPose, AnchorSpec, Regime};
pub use cloth::{build_mesh, generate_cloth, ClothMesh, ClothSpec, HoleSpec};
pub use control::{pd_control, PdGains};
pub use episode::{Episode, EpisodeConfig, EpisodeResult};
pub use error::{Result, SimError};
pub use geom::Vec3;
pub use physics::{SimParams, SimState, Simulator};
pub use policy::{EvalPolicy, Policy, PolicyParams, PseudoExpert};
pub use scenario::Scenario;
pub use success::{success_check, SuccessReport};
