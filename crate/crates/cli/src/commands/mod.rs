pub mod eval;
pub mod gen_data;
pub mod predict;
pub mod rollout;
pub mod train;
