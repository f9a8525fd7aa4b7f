//! AdamW training with linear warmup and cosine decay.
//!
//! The batch stream is a concatenation of per-epoch permutations and every
//! step draws its randomness from a generator keyed by `(seed, step)`, so a
//! run restored from a checkpoint continues exactly as the original would
//! have.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use xdisp_autodiff::{Graph, Tensor, Var};
use xdisp_sim::Vec3;

use crate::cloud_tensor;
use crate::dataset::{fps_downsample, frame_example, gather, rotate_about, DemoSet};
use crate::diffusion::{
    hybrid_loss, mse_loss, q_sample, standard_normal, LossTarget, NoiseSchedule, DEFAULT_LAMBDA,
};
use crate::error::{CoreError, Result};
use crate::model::{split_output, Dit, ModelInput};
use crate::rng::{stream_rng, TAG_EPOCH, TAG_STEP};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub warmup_steps: u64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Full passes over the demonstrations.
    pub epochs: u64,
    /// Overrides `epochs` when set.
    pub max_steps: Option<u64>,
    pub seed: u64,
    pub lambda: f64,
    /// Random rotation of anchor and goal about the anchor's vertical axis.
    pub augment: bool,
    pub action_points: usize,
    pub anchor_points: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            warmup_steps: 100,
            weight_decay: 1e-5,
            batch_size: 16,
            epochs: 2_000,
            max_steps: None,
            seed: 0,
            lambda: DEFAULT_LAMBDA,
            augment: true,
            action_points: 512,
            anchor_points: 512,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CoreError::Config(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.weight_decay < 0.0 || self.lambda < 0.0 {
            return bad("weight_decay and lambda must be non-negative");
        }
        if self.action_points == 0 || self.anchor_points == 0 {
            return bad("point counts must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn total_steps(&self, num_examples: usize) -> u64 {
        self.max_steps.unwrap_or_else(|| {
            let per_epoch = num_examples.div_ceil(self.batch_size).max(1) as u64;
            self.epochs * per_epoch
        })
    }
}

/// Learning rate for 0-based `step`: linear warmup to `base`, then a
/// half-cosine down to zero at `total`.
pub fn lr_at(step: u64, total: u64, warmup: u64, base: f64) -> f64 {
    if step < warmup {
        return base * (step + 1) as f64 / warmup as f64;
    }
    let span = total.saturating_sub(warmup).max(1) as f64;
    let progress = ((step - warmup) as f64 / span).min(1.0);
    0.5 * base * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn zeros_like(model: &Dit) -> Self {
        let shapes = model.params().iter().map(|(_, t)| t.shape().to_vec());
        let m: Vec<Tensor> = shapes.map(Tensor::zeros).collect();
        Self {
            step: 0,
            v: m.clone(),
            m,
        }
    }

    /// Decoupled-weight-decay Adam update, PyTorch ordering.
    pub fn update(&mut self, model: &mut Dit, grads: &[Tensor], lr: f64, cfg: &TrainConfig) {
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.step as i32);
        let decay = 1.0 - lr * cfg.weight_decay;
        let store = model.params_mut();
        for (k, g) in grads.iter().enumerate() {
            let p = store.tensor_mut(k).data_mut();
            let m = self.m[k].data_mut();
            let v = self.v[k].data_mut();
            for i in 0..p.len() {
                let gi = g.data()[i];
                p[i] *= decay;
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                p[i] -= lr * mh / (vh.sqrt() + cfg.adam_eps);
            }
        }
    }
}

/// A demonstration reduced to the training point counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub p_a: Vec<Vec3>,
    pub p_a_goal: Vec<Vec3>,
    pub p_b: Vec<Vec3>,
}

pub fn prepare_examples(
    set: &DemoSet,
    action_points: usize,
    anchor_points: usize,
) -> Result<Vec<Example>> {
    set.records
        .iter()
        .map(|r| {
            let ia = fps_downsample(&r.p_a, action_points.min(r.p_a.len()), 0)?;
            let ib = fps_downsample(&r.p_b, anchor_points.min(r.p_b.len()), 0)?;
            Ok(Example {
                p_a: gather(&r.p_a, &ia),
                p_a_goal: gather(&r.p_a_goal, &ia),
                p_b: gather(&r.p_b, &ib),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: u64,
    pub loss: f64,
    /// Noise MSE (or the regression MSE).
    pub simple: f64,
    pub vlb: f64,
    pub lr: f64,
}

pub struct Trainer {
    pub model: Dit,
    pub schedule: NoiseSchedule,
    pub config: TrainConfig,
    pub adam: AdamState,
    examples: Vec<Example>,
    total_steps: u64,
    epoch_cache: Option<(u64, Vec<usize>)>,
}

impl Trainer {
    pub fn new(
        model: Dit,
        schedule: NoiseSchedule,
        config: TrainConfig,
        examples: Vec<Example>,
    ) -> Result<Self> {
        let adam = AdamState::zeros_like(&model);
        Self::resume(model, schedule, config, examples, adam)
    }

    pub fn resume(
        model: Dit,
        schedule: NoiseSchedule,
        config: TrainConfig,
        examples: Vec<Example>,
        adam: AdamState,
    ) -> Result<Self> {
        config.validate()?;
        if examples.is_empty() {
            return Err(CoreError::Empty("training set"));
        }
        if adam.m.len() != model.params().len() || adam.v.len() != model.params().len() {
            return Err(CoreError::Config(
                "optimizer state does not match the model".into(),
            ));
        }
        let total_steps = config.total_steps(examples.len());
        Ok(Self {
            model,
            schedule,
            config,
            adam,
            examples,
            total_steps,
            epoch_cache: None,
        })
    }

    /// Number of updates applied so far.
    pub fn step(&self) -> u64 {
        self.adam.step
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn finished(&self) -> bool {
        self.step() >= self.total_steps
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    fn example_at(&mut self, k: u64) -> usize {
        let n = self.examples.len() as u64;
        let epoch = k / n;
        if self.epoch_cache.as_ref().map(|c| c.0) != Some(epoch) {
            let mut perm: Vec<usize> = (0..self.examples.len()).collect();
            perm.shuffle(&mut stream_rng(self.config.seed, TAG_EPOCH, epoch));
            self.epoch_cache = Some((epoch, perm));
        }
        self.epoch_cache.as_ref().expect("filled above").1[(k % n) as usize]
    }

    /// Example indices making up batch `step`.
    pub fn batch_indices(&mut self, step: u64) -> Vec<usize> {
        let b = self.config.batch_size as u64;
        (0..b).map(|j| self.example_at(step * b + j)).collect()
    }

    fn example_loss<'g, R: Rng>(
        &self,
        g: &'g Graph,
        p: &[Var<'g>],
        ex: &Example,
        rng: &mut R,
    ) -> Result<(Var<'g>, f64, f64)> {
        let variant = self.model.config().variant;
        let (goal, anchor) = if self.config.augment {
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let c = crate::dataset::mean(&ex.p_b, "anchor cloud")?;
            (
                rotate_about(&ex.p_a_goal, c, theta),
                rotate_about(&ex.p_b, c, theta),
            )
        } else {
            (ex.p_a_goal.clone(), ex.p_b.clone())
        };
        let framed = frame_example(variant, &ex.p_a, &goal, &anchor)?;
        let x0 = cloud_tensor(&framed.target);
        let action = cloud_tensor(&framed.action);
        let anchor = cloud_tensor(&framed.anchor);
        if variant.is_regression() {
            let input = ModelInput {
                noisy: Tensor::zeros(action.shape().to_vec()),
                action,
                anchor,
            };
            let out = self.model.forward(g, p, &input, 0)?;
            let loss = mse_loss(out, &x0)?;
            let v = loss.value().item();
            return Ok((loss, v, 0.0));
        }
        let t = rng.gen_range(1..=self.schedule.steps());
        let eps = standard_normal(rng, x0.shape());
        let xt = q_sample(&x0, t, &eps, &self.schedule)?;
        let input = ModelInput {
            action,
            anchor,
            noisy: xt.clone(),
        };
        let out = self.model.forward(g, p, &input, t)?;
        let (eps_pred, v) = split_output(out)?;
        let target = LossTarget {
            x0: &x0,
            xt: &xt,
            eps: &eps,
            t,
        };
        let terms = hybrid_loss(eps_pred, v, &target, &self.schedule, self.config.lambda)?;
        Ok((
            terms.total,
            terms.simple.value().item(),
            terms.vlb.value().item(),
        ))
    }

    /// One optimizer update on the next batch.
    pub fn train_step(&mut self) -> Result<StepStats> {
        let step = self.step();
        let batch = self.batch_indices(step);
        let mut rng = stream_rng(self.config.seed, TAG_STEP, step);
        let mut acc: Vec<Tensor> = self
            .model
            .params()
            .iter()
            .map(|(_, t)| Tensor::zeros(t.shape().to_vec()))
            .collect();
        let (mut loss, mut simple, mut vlb) = (0.0, 0.0, 0.0);
        for &i in &batch {
            let g = Graph::new();
            let p = self.model.params().bind(&g, true);
            let (l, s, v) = self.example_loss(&g, &p, &self.examples[i], &mut rng)?;
            loss += l.value().item();
            simple += s;
            vlb += v;
            let grads = g.backward(l)?;
            for (a, var) in acc.iter_mut().zip(&p) {
                if let Some(gr) = grads.get(var) {
                    for (x, y) in a.data_mut().iter_mut().zip(gr.data()) {
                        *x += y;
                    }
                }
            }
        }
        let b = batch.len() as f64;
        let (loss, simple, vlb) = (loss / b, simple / b, vlb / b);
        if !loss.is_finite() {
            return Err(CoreError::NanLoss { step });
        }
        for a in &mut acc {
            for x in a.data_mut() {
                *x /= b;
            }
        }
        let lr = lr_at(
            step,
            self.total_steps,
            self.config.warmup_steps,
            self.config.learning_rate,
        );
        self.adam.update(&mut self.model, &acc, lr, &self.config);
        Ok(StepStats {
            step,
            loss,
            simple,
            vlb,
            lr,
        })
    }
}
