//! Cross-displacement diffusion for goal prediction between a deformable
//! action object and a rigid anchor.
//!
//! [`diffusion`] holds the noise schedule and losses, [`model`] the
//! transformer, [`dataset`] the demonstration pipeline, [`train`] and
//! [`checkpoint`] the optimization loop and its persistence, [`predict`]
//! the sampler, and [`metrics`] the evaluation measures.

pub mod checkpoint;
pub mod dataset;
pub mod diffusion;
mod error;
pub mod metrics;
pub mod model;
pub mod predict;
pub mod rng;
pub mod train;

pub use error::{CoreError, Result};

use xdisp_autodiff::Tensor;
use xdisp_sim::Vec3;

/// Packs a cloud into an N x 3 tensor.
pub fn cloud_tensor(points: &[Vec3]) -> Tensor {
    let data = points.iter().flatten().copied().collect();
    Tensor::new([points.len(), 3], data).expect("three values per point")
}

/// Unpacks an N x 3 tensor (extra columns are ignored).
pub fn tensor_cloud(t: &Tensor) -> Vec<Vec3> {
    (0..t.rows())
        .map(|i| {
            let r = t.row(i);
            [r[0], r[1], r[2]]
        })
        .collect()
}
