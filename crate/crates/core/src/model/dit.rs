//! Point-cloud diffusion transformer.
//!
//! Per-point MLP encoders feed action tokens through adaLN-Zero blocks of
//! self-attention, cross-attention to anchor features, and a pointwise MLP.
//! Anchor features are encoded once and reused by every block. No positional
//! encoding is used anywhere, so the network is equivariant to the action
//! point order and invariant to the anchor point order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use xdisp_autodiff::{Graph, Tensor, Var};

use super::config::{Frame, ModelConfig};
use super::params::ParamStore;
use crate::error::{CoreError, Result};

/// Longest wavelength of the sinusoidal timestep features.
pub const MAX_PERIOD: f64 = 10_000.0;

#[derive(Clone, Copy, Debug)]
struct Linear {
    w: usize,
    b: usize,
}

#[derive(Clone, Copy, Debug)]
struct Mlp {
    l1: Linear,
    l2: Linear,
}

#[derive(Clone, Copy, Debug)]
struct CrossIds {
    q: Linear,
    kv: Linear,
    proj: Linear,
}

#[derive(Clone, Copy, Debug)]
struct BlockIds {
    ada: Linear,
    qkv: Linear,
    proj: Linear,
    cross: Option<CrossIds>,
    fc1: Linear,
    fc2: Linear,
}

#[derive(Clone, Copy, Debug)]
enum Conditioning {
    Timestep(Mlp),
    /// Learned vector standing in for the timestep embedding.
    Constant(usize),
}

#[derive(Clone, Debug)]
struct Layout {
    enc_dx: Mlp,
    enc_a: Option<Mlp>,
    enc_b: Option<Mlp>,
    cond: Conditioning,
    blocks: Vec<BlockIds>,
    final_ada: Linear,
    head: Linear,
}

#[derive(Clone, Copy)]
enum Init {
    Xavier,
    Normal(f64),
    Zero,
}

struct Builder<'a> {
    store: ParamStore,
    rng: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    fn tensor(&mut self, name: String, shape: &[usize], init: Init) -> Result<usize> {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = match init {
            Init::Zero => vec![0.0; n],
            Init::Xavier => {
                let bound = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                (0..n).map(|_| self.rng.gen_range(-bound..bound)).collect()
            }
            Init::Normal(std) => {
                let d = Normal::new(0.0, std).expect("positive std");
                (0..n).map(|_| d.sample(self.rng)).collect()
            }
        };
        self.store.insert(name, Tensor::new(shape.to_vec(), data)?)
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize, init: Init) -> Result<Linear> {
        Ok(Linear {
            w: self.tensor(format!("{name}.w"), &[fan_in, fan_out], init)?,
            b: self.tensor(format!("{name}.b"), &[fan_out], Init::Zero)?,
        })
    }

    fn mlp(&mut self, name: &str, dims: [usize; 3], init: Init) -> Result<Mlp> {
        Ok(Mlp {
            l1: self.linear(&format!("{name}.l1"), dims[0], dims[1], init)?,
            l2: self.linear(&format!("{name}.l2"), dims[1], dims[2], init)?,
        })
    }
}

/// Already-framed network inputs for one example.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelInput {
    /// Initial action cloud, N x 3.
    pub action: Tensor,
    /// Anchor cloud, M x 3.
    pub anchor: Tensor,
    /// Diffused variable at the current step, N x 3. Ignored by the
    /// regression variants.
    pub noisy: Tensor,
}

#[derive(Clone, Debug)]
pub struct Dit {
    config: ModelConfig,
    params: ParamStore,
    layout: Layout,
}

fn linear<'g>(p: &[Var<'g>], l: Linear, x: Var<'g>) -> Result<Var<'g>> {
    Ok(x.matmul(&p[l.w])?.add_row(&p[l.b])?)
}

fn mlp<'g>(p: &[Var<'g>], m: Mlp, x: Var<'g>) -> Result<Var<'g>> {
    linear(p, m.l2, linear(p, m.l1, x)?.silu())
}

fn modulate<'g>(x: Var<'g>, shift: Var<'g>, scale: Var<'g>) -> Result<Var<'g>> {
    Ok(x.mul_row(&scale.add_scalar(1.0))?.add_row(&shift)?)
}

/// Dense multi-head attention. `q` is n x d, `k` and `v` are m x d.
pub fn attention<'g>(q: Var<'g>, k: Var<'g>, v: Var<'g>, heads: usize) -> Result<Var<'g>> {
    let d = *q.shape().last().unwrap_or(&0);
    if heads == 0 || !d.is_multiple_of(heads) {
        return Err(CoreError::Config(format!(
            "width {d} not divisible into {heads} heads"
        )));
    }
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (a, b) = (h * dh, (h + 1) * dh);
        let qh = q.slice_cols(a, b)?;
        let kh = k.slice_cols(a, b)?;
        let vh = v.slice_cols(a, b)?;
        let w = qh.matmul_t(&kh)?.scale(scale).softmax();
        outs.push(w.matmul(&vh)?);
    }
    Ok(Var::concat(&outs)?)
}

/// `[cos(t f_0) .. cos(t f_{h-1}), sin(t f_0) .. sin(t f_{h-1})]` with
/// geometrically spaced frequencies.
pub fn timestep_features(t: f64, dim: usize) -> Tensor {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let f = (-(MAX_PERIOD.ln()) * i as f64 / half as f64).exp();
        out[i] = (t * f).cos();
        out[half + i] = (t * f).sin();
    }
    Tensor::new([1, dim], out).expect("length matches")
}

fn check_cloud(op: &'static str, t: &Tensor, rows: Option<usize>) -> Result<()> {
    let ok = t.shape().len() == 2 && t.shape()[1] == 3 && rows.is_none_or(|r| t.shape()[0] == r);
    if !ok {
        return Err(CoreError::Shape {
            op,
            expected: vec![rows.unwrap_or(0), 3],
            got: t.shape().to_vec(),
        });
    }
    Ok(())
}

fn stack_rows(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mut data = a.data().to_vec();
    data.extend_from_slice(b.data());
    Ok(Tensor::new([a.rows() + b.rows(), a.cols()], data)?)
}

impl Dit {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Builder {
            store: ParamStore::new(),
            rng: &mut rng,
        };
        let h = config.hidden_size;
        let d = config.token_width();
        let e = config.encoder_width;
        let v = config.variant;
        let scene = v.frame() == Frame::Scene;

        let enc_dx = b.mlp("enc_dx", [3, e, h], Init::Xavier)?;
        let enc_a = if v.action_context() {
            Some(b.mlp("enc_a", [3, e, h], Init::Xavier)?)
        } else {
            None
        };
        let enc_b = if scene {
            None
        } else {
            Some(b.mlp("enc_b", [3, e, h], Init::Xavier)?)
        };
        let cond = if v.is_regression() {
            Conditioning::Constant(b.tensor("cond".into(), &[1, h], Init::Normal(0.02))?)
        } else {
            Conditioning::Timestep(b.mlp(
                "t_embed",
                [config.frequency_dim, h, h],
                Init::Normal(0.02),
            )?)
        };
        let n_mod = if v.cross_attention() { 9 } else { 6 };
        let mut blocks = Vec::with_capacity(config.depth);
        for i in 0..config.depth {
            let p = format!("blocks.{i}");
            let ada = b.linear(&format!("{p}.ada"), h, n_mod * d, Init::Zero)?;
            let qkv = b.linear(&format!("{p}.attn.qkv"), d, 3 * d, Init::Xavier)?;
            let proj = b.linear(&format!("{p}.attn.proj"), d, d, Init::Xavier)?;
            let cross = if v.cross_attention() {
                Some(CrossIds {
                    q: b.linear(&format!("{p}.cross.q"), d, d, Init::Xavier)?,
                    kv: b.linear(&format!("{p}.cross.kv"), h, 2 * d, Init::Xavier)?,
                    proj: b.linear(&format!("{p}.cross.proj"), d, d, Init::Xavier)?,
                })
            } else {
                None
            };
            let fc1 = b.linear(
                &format!("{p}.mlp.fc1"),
                d,
                config.mlp_ratio * d,
                Init::Xavier,
            )?;
            let fc2 = b.linear(
                &format!("{p}.mlp.fc2"),
                config.mlp_ratio * d,
                d,
                Init::Xavier,
            )?;
            blocks.push(BlockIds {
                ada,
                qkv,
                proj,
                cross,
                fc1,
                fc2,
            });
        }
        let final_ada = b.linear("final.ada", h, 2 * d, Init::Zero)?;
        let head = b.linear("final.head", d, config.out_channels(), Init::Xavier)?;
        let layout = Layout {
            enc_dx,
            enc_a,
            enc_b,
            cond,
            blocks,
            final_ada,
            head,
        };
        Ok(Self {
            config,
            params: b.store,
            layout,
        })
    }

    /// Rebuilds a model from saved tensors; every name and shape must match
    /// what `config` expects.
    pub fn from_named(config: ModelConfig, named: Vec<(String, Tensor)>) -> Result<Self> {
        let mut model = Self::new(config, 0)?;
        if named.len() != model.params.len() {
            return Err(CoreError::Config(format!(
                "expected {} parameter tensors, got {}",
                model.params.len(),
                named.len()
            )));
        }
        for (name, t) in named {
            let id = model.params.id(&name)?;
            let slot = model.params.tensor_mut(id);
            if slot.shape() != t.shape() {
                return Err(CoreError::Shape {
                    op: "load parameter",
                    expected: slot.shape().to_vec(),
                    got: t.shape().to_vec(),
                });
            }
            *slot = t;
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Conditioning vector `c`, 1 x hidden.
    pub fn conditioning<'g>(&self, g: &'g Graph, p: &[Var<'g>], t: usize) -> Result<Var<'g>> {
        match self.layout.cond {
            Conditioning::Constant(id) => Ok(p[id]),
            Conditioning::Timestep(m) => {
                let f = g.constant(timestep_features(t as f64, self.config.frequency_dim));
                mlp(p, m, f)
            }
        }
    }

    /// Action tokens (N x token width) and, outside the scene frame, anchor
    /// features (M x hidden). In the scene frame the anchor rows are appended
    /// to the action rows with a zero diffused input and no anchor features
    /// are returned.
    pub fn encode<'g>(
        &self,
        g: &'g Graph,
        p: &[Var<'g>],
        input: &ModelInput,
    ) -> Result<(Var<'g>, Option<Var<'g>>)> {
        let n = input.action.shape().first().copied().unwrap_or(0);
        check_cloud("encode action", &input.action, None)?;
        check_cloud("encode anchor", &input.anchor, None)?;
        if n == 0 {
            return Err(CoreError::Empty("action cloud"));
        }
        let noisy = if self.config.variant.is_regression() {
            Tensor::zeros([n, 3])
        } else {
            check_cloud("encode diffused input", &input.noisy, Some(n))?;
            input.noisy.clone()
        };
        let (points, noisy) = if self.config.variant.frame() == Frame::Scene {
            let m = input.anchor.rows();
            (
                stack_rows(&input.action, &input.anchor)?,
                stack_rows(&noisy, &Tensor::zeros([m, 3]))?,
            )
        } else {
            (input.action.clone(), noisy)
        };
        let f_dx = mlp(p, self.layout.enc_dx, g.constant(noisy))?;
        let tokens = match self.layout.enc_a {
            Some(m) => Var::concat(&[mlp(p, m, g.constant(points))?, f_dx])?,
            None => f_dx,
        };
        let anchor = match self.layout.enc_b {
            Some(m) => {
                if input.anchor.rows() == 0 {
                    return Err(CoreError::Empty("anchor cloud"));
                }
                Some(mlp(p, m, g.constant(input.anchor.clone()))?)
            }
            None => None,
        };
        Ok((tokens, anchor))
    }

    /// One adaLN-Zero block; anchor features pass through untouched.
    pub fn block<'g>(
        &self,
        p: &[Var<'g>],
        i: usize,
        x: Var<'g>,
        anchor: Option<Var<'g>>,
        c: Var<'g>,
    ) -> Result<Var<'g>> {
        let ids = self.layout.blocks[i];
        let d = self.config.token_width();
        let heads = self.config.num_heads;
        let mods = linear(p, ids.ada, c.silu())?;
        let chunk = |k: usize| mods.slice_cols(k * d, (k + 1) * d);

        let h = modulate(x.layer_norm(), chunk(0)?, chunk(1)?)?;
        let qkv = linear(p, ids.qkv, h)?;
        let att = attention(
            qkv.slice_cols(0, d)?,
            qkv.slice_cols(d, 2 * d)?,
            qkv.slice_cols(2 * d, 3 * d)?,
            heads,
        )?;
        let mut x = x.add(&linear(p, ids.proj, att)?.mul_row(&chunk(2)?)?)?;
        let mut k = 3;
        if let Some(cross) = ids.cross {
            let anchor = anchor.ok_or(CoreError::Empty("anchor features"))?;
            let h = modulate(x.layer_norm(), chunk(3)?, chunk(4)?)?;
            let q = linear(p, cross.q, h)?;
            let kv = linear(p, cross.kv, anchor)?;
            let att = attention(q, kv.slice_cols(0, d)?, kv.slice_cols(d, 2 * d)?, heads)?;
            x = x.add(&linear(p, cross.proj, att)?.mul_row(&chunk(5)?)?)?;
            k = 6;
        }
        let h = modulate(x.layer_norm(), chunk(k)?, chunk(k + 1)?)?;
        let m = linear(p, ids.fc2, linear(p, ids.fc1, h)?.gelu())?;
        Ok(x.add(&m.mul_row(&chunk(k + 2)?)?)?)
    }

    /// Final adaLN modulation and linear head.
    pub fn head<'g>(&self, p: &[Var<'g>], x: Var<'g>, c: Var<'g>) -> Result<Var<'g>> {
        let d = self.config.token_width();
        let mods = linear(p, self.layout.final_ada, c.silu())?;
        let h = modulate(
            x.layer_norm(),
            mods.slice_cols(0, d)?,
            mods.slice_cols(d, 2 * d)?,
        )?;
        linear(p, self.layout.head, h)
    }

    /// Raw network output, N x 6 (noise, unsquashed v) or N x 3 for the
    /// regression variants. `p` must come from [`ParamStore::bind`] on this
    /// model's parameters.
    pub fn forward<'g>(
        &self,
        g: &'g Graph,
        p: &[Var<'g>],
        input: &ModelInput,
        t: usize,
    ) -> Result<Var<'g>> {
        if p.len() != self.params.len() {
            return Err(CoreError::Config(format!(
                "expected {} bound parameters, got {}",
                self.params.len(),
                p.len()
            )));
        }
        let n = input.action.rows();
        let c = self.conditioning(g, p, t)?;
        let (mut x, anchor) = self.encode(g, p, input)?;
        for i in 0..self.config.depth {
            x = self.block(p, i, x, anchor, c)?;
        }
        let out = self.head(p, x, c)?;
        if self.config.variant.frame() == Frame::Scene {
            let rows: Vec<usize> = (0..n).collect();
            return Ok(out.gather_rows(&rows)?);
        }
        Ok(out)
    }

    /// Forward pass on a throwaway tape with frozen parameters.
    pub fn evaluate(&self, input: &ModelInput, t: usize) -> Result<Tensor> {
        let g = Graph::new();
        let p = self.params.bind(&g, false);
        let out = self.forward(&g, &p, input, t)?;
        let value = out.value();
        Ok(value.as_ref().clone())
    }
}

/// Splits a 6-channel output into the noise prediction and sigmoid-squashed
/// `v`.
pub fn split_output(out: Var<'_>) -> Result<(Var<'_>, Var<'_>)> {
    Ok((out.slice_cols(0, 3)?, out.slice_cols(3, 6)?.sigmoid()))
}
