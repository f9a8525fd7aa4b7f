//! Goal prediction: frame the scene, denoise (or regress), decode to world.

use xdisp_autodiff::Tensor;
use xdisp_sim::{geom, Vec3};

use crate::dataset::{fps_downsample, gather, SceneFrame};
use crate::diffusion::{sample_loop, standard_normal, NoiseSchedule};
use crate::error::{CoreError, Result};
use crate::model::{Dit, ModelInput};
use crate::rng::{stream_rng, TAG_SAMPLE};
use crate::{cloud_tensor, tensor_cloud};

fn split_eps_v(out: &Tensor) -> Result<(Tensor, Tensor)> {
    let n = out.rows();
    let mut eps = Vec::with_capacity(3 * n);
    let mut v = Vec::with_capacity(3 * n);
    for i in 0..n {
        let r = out.row(i);
        eps.extend_from_slice(&r[..3]);
        v.extend(r[3..6].iter().map(|x| 1.0 / (1.0 + (-x).exp())));
    }
    Ok((Tensor::new([n, 3], eps)?, Tensor::new([n, 3], v)?))
}

/// One world-frame goal prediction for the action cloud `p_a` next to the
/// anchor cloud `p_b`. Identical seeds give bit-identical outputs.
pub fn sample(
    model: &Dit,
    s: &NoiseSchedule,
    p_a: &[Vec3],
    p_b: &[Vec3],
    seed: u64,
) -> Result<Vec<Vec3>> {
    sample_indexed(model, s, p_a, p_b, seed, 0)
}

/// Sample number `index` of the sub-seed family rooted at `seed`.
pub fn sample_indexed(
    model: &Dit,
    s: &NoiseSchedule,
    p_a: &[Vec3],
    p_b: &[Vec3],
    seed: u64,
    index: u64,
) -> Result<Vec<Vec3>> {
    let variant = model.config().variant;
    let frame = SceneFrame::new(variant.frame(), p_a, p_b)?;
    let action = cloud_tensor(&frame.action(p_a));
    let anchor = cloud_tensor(&frame.anchor(p_b));
    let shape = action.shape().to_vec();
    let mut input = ModelInput {
        action,
        anchor,
        noisy: Tensor::zeros(shape.clone()),
    };
    let out = if variant.is_regression() {
        model.evaluate(&input, 0)?
    } else {
        let mut rng = stream_rng(seed, TAG_SAMPLE, index);
        let x_t = standard_normal(&mut rng, &shape);
        sample_loop(s, x_t, &mut rng, |x, t| {
            input.noisy = x.clone();
            split_eps_v(&model.evaluate(&input, t)?)
        })?
    };
    frame.decode(variant.target(), p_a, &tensor_cloud(&out))
}

/// `n` predictions with distinct sub-seeds.
pub fn sample_many(
    model: &Dit,
    s: &NoiseSchedule,
    p_a: &[Vec3],
    p_b: &[Vec3],
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec3>>> {
    (0..n as u64)
        .map(|i| sample_indexed(model, s, p_a, p_b, seed, i))
        .collect()
}

/// Furthest-point subset of `k` action points, extended with any of
/// `required` (the gripper vertices) it missed.
pub fn prediction_subset(p_a: &[Vec3], k: usize, required: &[usize]) -> Result<Vec<usize>> {
    let mut idx = fps_downsample(p_a, k.min(p_a.len()), 0)?;
    for &r in required {
        if r >= p_a.len() {
            return Err(CoreError::Config(format!(
                "required index {r} out of range for {} points",
                p_a.len()
            )));
        }
        if !idx.contains(&r) {
            idx.push(r);
        }
    }
    Ok(idx)
}

/// Predicts on the points `subset` of `p_a` and moves every other point by
/// the predicted displacement of its nearest subset point (nearest in the
/// initial cloud, lowest index on ties). Returns a full-length goal cloud.
pub fn sample_dense(
    model: &Dit,
    s: &NoiseSchedule,
    p_a: &[Vec3],
    p_b: &[Vec3],
    subset: &[usize],
    seed: u64,
    index: u64,
) -> Result<Vec<Vec3>> {
    if subset.is_empty() {
        return Err(CoreError::Empty("prediction subset"));
    }
    let sub = gather(p_a, subset);
    let pred = sample_indexed(model, s, &sub, p_b, seed, index)?;
    let disp: Vec<Vec3> = pred
        .iter()
        .zip(&sub)
        .map(|(g, a)| geom::sub(*g, *a))
        .collect();
    let mut out: Vec<Option<Vec3>> = vec![None; p_a.len()];
    for (k, &i) in subset.iter().enumerate() {
        out[i] = Some(pred[k]);
    }
    Ok(out
        .into_iter()
        .zip(p_a)
        .map(|(o, a)| {
            o.unwrap_or_else(|| {
                let mut best = (0, f64::INFINITY);
                for (k, q) in sub.iter().enumerate() {
                    let d = geom::dist(*a, *q);
                    if d < best.1 {
                        best = (k, d);
                    }
                }
                geom::add(*a, disp[best.0])
            })
        })
        .collect())
}
