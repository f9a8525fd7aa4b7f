//! The displacement-diffusion transformer and its ablation variants.

mod config;
mod dit;
mod params;

pub use config::{Frame, ModelConfig, Target, Variant};
pub use dit::{attention, split_output, timestep_features, Dit, ModelInput, MAX_PERIOD};
pub use params::ParamStore;
