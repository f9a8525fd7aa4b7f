//! DDPM machinery over per-point displacement fields.
//!
//! Timesteps run 1..=T for noised states; index 0 is clean data with
//! `alpha_bar(0) = 1`. The model predicts the injected noise and a squashed
//! interpolation exponent `v` for the reverse-process log-variance.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use xdisp_autodiff::{Tensor, Var};

use crate::error::{CoreError, Result};

pub const DEFAULT_STEPS: usize = 100;
/// Weight of the variational bound in the hybrid loss.
pub const DEFAULT_LAMBDA: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl ScheduleConfig {
    /// The 1e-4..0.02 over 1000 steps endpoints, rescaled to `steps`.
    pub fn linear(steps: usize) -> Self {
        let scale = 1000.0 / steps.max(1) as f64;
        Self {
            steps,
            beta_start: 1e-4 * scale,
            beta_end: (0.02 * scale).min(0.999),
        }
    }
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self::linear(DEFAULT_STEPS)
    }
}

/// Precomputed schedule arrays, all indexed by timestep (entry 0 is the
/// clean-data convention).
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    config: ScheduleConfig,
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
    posterior_variances: Vec<f64>,
    log_variance_clipped: Vec<f64>,
}

pub fn make_linear_schedule(steps: usize) -> Result<NoiseSchedule> {
    NoiseSchedule::new(ScheduleConfig::linear(steps))
}

impl NoiseSchedule {
    pub fn new(config: ScheduleConfig) -> Result<Self> {
        let t_max = config.steps;
        if t_max < 1 {
            return Err(CoreError::Config("schedule needs at least one step".into()));
        }
        let (b0, b1) = (config.beta_start, config.beta_end);
        if !(b0 > 0.0 && b0 <= b1 && b1 < 1.0) {
            return Err(CoreError::Config(format!(
                "beta endpoints must satisfy 0 < {b0} <= {b1} < 1"
            )));
        }
        let mut betas = vec![0.0; t_max + 1];
        for (t, b) in betas.iter_mut().enumerate().skip(1) {
            *b = if t_max == 1 {
                b0
            } else {
                b0 + (b1 - b0) * (t - 1) as f64 / (t_max - 1) as f64
            };
        }
        let mut alpha_bars = vec![1.0; t_max + 1];
        for t in 1..=t_max {
            alpha_bars[t] = alpha_bars[t - 1] * (1.0 - betas[t]);
        }
        let mut posterior_variances = vec![0.0; t_max + 1];
        for t in 1..=t_max {
            posterior_variances[t] = betas[t] * (1.0 - alpha_bars[t - 1]) / (1.0 - alpha_bars[t]);
        }
        // The posterior variance is 0 at t=1; borrow the t=2 value (or beta_1)
        // so the log stays finite.
        let mut log_variance_clipped = vec![0.0; t_max + 1];
        for t in 1..=t_max {
            let var = if t == 1 {
                if t_max >= 2 {
                    posterior_variances[2]
                } else {
                    betas[1]
                }
            } else {
                posterior_variances[t]
            };
            log_variance_clipped[t] = var.ln();
        }
        Ok(Self {
            config,
            betas,
            alpha_bars,
            posterior_variances,
            log_variance_clipped,
        })
    }

    pub fn config(&self) -> ScheduleConfig {
        self.config
    }

    pub fn steps(&self) -> usize {
        self.config.steps
    }

    fn check(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.config.steps {
            return Err(CoreError::Timestep {
                t,
                steps: self.config.steps,
            });
        }
        Ok(())
    }

    /// Panics outside 1..=T, like the other per-step accessors.
    pub fn beta(&self, t: usize) -> f64 {
        assert!(t >= 1, "beta is undefined at t=0");
        self.betas[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.beta(t)
    }

    /// Defined for 0..=T.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    pub fn posterior_variance(&self, t: usize) -> f64 {
        assert!(t >= 1, "posterior variance is undefined at t=0");
        self.posterior_variances[t]
    }

    pub fn posterior_log_variance_clipped(&self, t: usize) -> f64 {
        assert!(t >= 1, "posterior variance is undefined at t=0");
        self.log_variance_clipped[t]
    }

    /// Coefficients `(c0, ct)` of the true posterior mean `c0*x0 + ct*xt`.
    pub fn posterior_mean_coefs(&self, t: usize) -> (f64, f64) {
        let ab = self.alpha_bars[t];
        let ab_prev = self.alpha_bars[t - 1];
        let b = self.betas[t];
        (
            b * ab_prev.sqrt() / (1.0 - ab),
            (1.0 - ab_prev) * (1.0 - b).sqrt() / (1.0 - ab),
        )
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(CoreError::Shape {
            op,
            expected: a.shape().to_vec(),
            got: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::new(a.shape().to_vec(), data).expect("shapes checked by caller")
}

/// Forward noising: `sqrt(ab_t) x0 + sqrt(1 - ab_t) eps`.
pub fn q_sample(x0: &Tensor, t: usize, eps: &Tensor, s: &NoiseSchedule) -> Result<Tensor> {
    same_shape("q_sample", x0, eps)?;
    if t > s.steps() {
        return Err(CoreError::Timestep {
            t,
            steps: s.steps(),
        });
    }
    let ab = s.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(zip_map(x0, eps, |x, e| a * x + b * e))
}

/// Reverse-process mean from a noise prediction.
pub fn model_mean(xt: &Tensor, t: usize, eps_pred: &Tensor, s: &NoiseSchedule) -> Result<Tensor> {
    same_shape("model_mean", xt, eps_pred)?;
    s.check(t)?;
    let inv_sqrt_alpha = 1.0 / s.alpha(t).sqrt();
    let k = s.beta(t) / (1.0 - s.alpha_bar(t)).sqrt();
    Ok(zip_map(xt, eps_pred, |x, e| inv_sqrt_alpha * (x - k * e)))
}

/// Mean of q(x_{t-1} | x_t, x_0).
pub fn posterior_mean(x0: &Tensor, xt: &Tensor, t: usize, s: &NoiseSchedule) -> Result<Tensor> {
    same_shape("posterior_mean", x0, xt)?;
    s.check(t)?;
    let (c0, ct) = s.posterior_mean_coefs(t);
    Ok(zip_map(x0, xt, |a, b| c0 * a + ct * b))
}

/// `v log beta_t + (1 - v) log beta_tilde_t` for a scalar `v`.
pub fn interpolated_log_variance(t: usize, v: f64, s: &NoiseSchedule) -> f64 {
    let lb = s.beta(t).ln();
    let lp = s.posterior_log_variance_clipped(t);
    v * lb + (1.0 - v) * lp
}

/// One ancestral step. `v` must already be squashed into [0, 1]; `noise` is
/// ignored at t=1.
pub fn reverse_step(
    xt: &Tensor,
    t: usize,
    eps_pred: &Tensor,
    v: &Tensor,
    s: &NoiseSchedule,
    noise: &Tensor,
) -> Result<Tensor> {
    same_shape("reverse_step", xt, v)?;
    same_shape("reverse_step", xt, noise)?;
    if let Some(bad) = v.data().iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(CoreError::Config(format!(
            "v must lie in [0, 1], got {bad}"
        )));
    }
    let mean = model_mean(xt, t, eps_pred, s)?;
    if t == 1 {
        return Ok(mean);
    }
    let data = mean
        .data()
        .iter()
        .zip(v.data())
        .zip(noise.data())
        .map(|((&m, &vi), &z)| m + (0.5 * interpolated_log_variance(t, vi, s)).exp() * z)
        .collect();
    Ok(Tensor::new(xt.shape().to_vec(), data)?)
}

/// KL(N(m1, exp(lv1)) || N(m2, exp(lv2))) in nats, one dimension.
pub fn gaussian_kl(m1: f64, lv1: f64, m2: f64, lv2: f64) -> f64 {
    0.5 * (-1.0 + lv2 - lv1 + (lv1 - lv2).exp() + (m1 - m2).powi(2) * (-lv2).exp())
}

/// Negative log density of `x` under N(mean, exp(log_var)), in nats.
pub fn gaussian_nll(x: f64, mean: f64, log_var: f64) -> f64 {
    0.5 * ((2.0 * std::f64::consts::PI).ln() + log_var + (x - mean).powi(2) * (-log_var).exp())
}

/// Tensors a single training example contributes to the loss.
#[derive(Clone, Copy, Debug)]
pub struct LossTarget<'a> {
    pub x0: &'a Tensor,
    pub xt: &'a Tensor,
    pub eps: &'a Tensor,
    pub t: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct LossTerms<'g> {
    pub total: Var<'g>,
    pub simple: Var<'g>,
    pub vlb: Var<'g>,
}

/// `mean((eps - eps_pred)^2) + lambda * L_vlb(t)`.
///
/// `v` is the squashed interpolation channel. The variational term sees the
/// mean through a detached copy of `eps_pred`, so only `v` trains through it.
pub fn hybrid_loss<'g>(
    eps_pred: Var<'g>,
    v: Var<'g>,
    target: &LossTarget<'_>,
    s: &NoiseSchedule,
    lambda: f64,
) -> Result<LossTerms<'g>> {
    let frozen = eps_pred.value();
    hybrid_loss_frozen(eps_pred, v, &frozen, target, s, lambda)
}

/// [`hybrid_loss`] with the detached noise prediction supplied explicitly.
/// Gradient checks use this to hold the stop-gradient input fixed while
/// perturbing parameters.
pub fn hybrid_loss_frozen<'g>(
    eps_pred: Var<'g>,
    v: Var<'g>,
    frozen_eps: &Tensor,
    target: &LossTarget<'_>,
    s: &NoiseSchedule,
    lambda: f64,
) -> Result<LossTerms<'g>> {
    let g = eps_pred.graph();
    let LossTarget { x0, xt, eps, t } = *target;
    same_shape("hybrid_loss", x0, xt)?;
    same_shape("hybrid_loss", x0, eps)?;
    same_shape("hybrid_loss", x0, frozen_eps)?;
    let got = eps_pred.shape();
    if got != x0.shape() || v.shape() != x0.shape() {
        return Err(CoreError::Shape {
            op: "hybrid_loss",
            expected: x0.shape().to_vec(),
            got,
        });
    }
    s.check(t)?;

    let simple = eps_pred.sub(&g.constant(eps.clone()))?.square().mean();

    let lb = s.beta(t).ln();
    let lp = s.posterior_log_variance_clipped(t);
    let log_var = v.scale(lb - lp).add_scalar(lp);
    let inv_var = log_var.neg().exp();
    let mu = model_mean(xt, t, frozen_eps, s)?;
    let vlb = if t == 1 {
        let sq = zip_map(x0, &mu, |a, b| (a - b).powi(2));
        log_var
            .add(&inv_var.mul(&g.constant(sq))?)?
            .add_scalar((2.0 * std::f64::consts::PI).ln())
            .scale(0.5)
            .mean()
    } else {
        let mu_q = posterior_mean(x0, xt, t, s)?;
        let var_q = s.posterior_variance(t);
        let c = zip_map(&mu_q, &mu, |a, b| var_q + (a - b).powi(2));
        log_var
            .add(&inv_var.mul(&g.constant(c))?)?
            .add_scalar(-1.0 - var_q.ln())
            .scale(0.5)
            .mean()
    };
    let total = simple.add(&vlb.scale(lambda))?;
    Ok(LossTerms { total, simple, vlb })
}

/// Plain mean squared error, used by the regression variants.
pub fn mse_loss<'g>(pred: Var<'g>, target: &Tensor) -> Result<Var<'g>> {
    let t = pred.graph().constant(target.clone());
    Ok(pred.sub(&t)?.square().mean())
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Tensor::new(shape.to_vec(), data).expect("length matches shape")
}

/// Ancestral sampling from `x_T` down to `x_0`. `denoise(x_t, t)` returns the
/// noise prediction and the squashed `v`. Noise is drawn for t >= 2 only.
pub fn sample_loop<R, F>(
    s: &NoiseSchedule,
    x_t: Tensor,
    rng: &mut R,
    mut denoise: F,
) -> Result<Tensor>
where
    R: Rng + ?Sized,
    F: FnMut(&Tensor, usize) -> Result<(Tensor, Tensor)>,
{
    let mut x = x_t;
    for t in (1..=s.steps()).rev() {
        let (eps, v) = denoise(&x, t)?;
        let noise = if t > 1 {
            standard_normal(rng, x.shape())
        } else {
            Tensor::zeros(x.shape().to_vec())
        };
        x = reverse_step(&x, t, &eps, &v, s, &noise)?;
    }
    Ok(x)
}
