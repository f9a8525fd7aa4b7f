//! Checkpoint container.
//!
//! Layout: the magic bytes `XDCK`, a little-endian `u32` format version, a
//! little-endian `u64` header length, the JSON header, then every tensor as
//! raw little-endian `f64` in header order. Offsets in the header are byte
//! offsets from the start of the data section.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use xdisp_autodiff::Tensor;

use crate::diffusion::ScheduleConfig;
use crate::error::{CoreError, Result};
use crate::model::{Dit, ModelConfig};
use crate::train::{AdamState, TrainConfig};

pub const MAGIC: &[u8; 4] = b"XDCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    pub train: TrainConfig,
    pub seed: u64,
    /// Optimizer updates applied.
    pub step: u64,
    pub params: Vec<(String, Tensor)>,
    pub adam: Option<AdamState>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    schedule: ScheduleConfig,
    train: TrainConfig,
    seed: u64,
    step: u64,
    adam_step: Option<u64>,
    tensors: Vec<TensorEntry>,
}

const ADAM_M: &str = "adam.m/";
const ADAM_V: &str = "adam.v/";

impl Checkpoint {
    pub fn from_model(
        model: &Dit,
        schedule: ScheduleConfig,
        train: &TrainConfig,
        adam: Option<&AdamState>,
    ) -> Self {
        Self {
            model: *model.config(),
            schedule,
            train: train.clone(),
            seed: train.seed,
            step: adam.map_or(0, |a| a.step),
            params: model
                .params()
                .iter()
                .map(|(n, t)| (n.to_string(), t.clone()))
                .collect(),
            adam: adam.cloned(),
        }
    }

    pub fn build_model(&self) -> Result<Dit> {
        Dit::from_named(self.model, self.params.clone())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut named: Vec<(String, &Tensor)> =
            self.params.iter().map(|(n, t)| (n.clone(), t)).collect();
        if let Some(a) = &self.adam {
            for ((n, _), t) in self.params.iter().zip(&a.m) {
                named.push((format!("{ADAM_M}{n}"), t));
            }
            for ((n, _), t) in self.params.iter().zip(&a.v) {
                named.push((format!("{ADAM_V}{n}"), t));
            }
        }
        let mut offset = 0u64;
        let mut entries = Vec::with_capacity(named.len());
        for (name, t) in &named {
            entries.push(TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
            });
            offset += 8 * t.numel() as u64;
        }
        let header = Header {
            model: self.model,
            schedule: self.schedule,
            train: self.train.clone(),
            seed: self.seed,
            step: self.step,
            adam_step: self.adam.as_ref().map(|a| a.step),
            tensors: entries,
        };
        let json = serde_json::to_vec(&header)
            .map_err(|e| CoreError::Config(format!("checkpoint header: {e}")))?;
        let mut out = Vec::with_capacity(16 + json.len() + offset as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in named {
            for x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |m: String| CoreError::format(path, m);
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(fail("not a checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(fail(format!("unsupported checkpoint version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let data_start = 16usize
            .checked_add(hlen)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| fail("truncated header".into()))?;
        let header: Header = serde_json::from_slice(&bytes[16..data_start])
            .map_err(|e| fail(format!("corrupt header: {e}")))?;
        let data = &bytes[data_start..];
        let mut params = Vec::new();
        let mut m = Vec::new();
        let mut v = Vec::new();
        let mut end = 0usize;
        for e in &header.tensors {
            let n: usize = e.shape.iter().product();
            let start = e.offset as usize;
            let stop = start + 8 * n;
            if stop > data.len() {
                return Err(fail(format!(
                    "tensor {} runs past the end of the file",
                    e.name
                )));
            }
            end = end.max(stop);
            let vals = data[start..stop]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let t = Tensor::new(e.shape.clone(), vals)?;
            if let Some(name) = e.name.strip_prefix(ADAM_M) {
                m.push((name.to_string(), t));
            } else if let Some(name) = e.name.strip_prefix(ADAM_V) {
                v.push((name.to_string(), t));
            } else {
                params.push((e.name.clone(), t));
            }
        }
        if end != data.len() {
            return Err(fail(format!(
                "{} trailing bytes after the last tensor",
                data.len() - end
            )));
        }
        let adam = match header.adam_step {
            None => None,
            Some(step) => {
                let names_match = |xs: &[(String, Tensor)]| {
                    xs.len() == params.len() && xs.iter().zip(&params).all(|(a, b)| a.0 == b.0)
                };
                if !names_match(&m) || !names_match(&v) {
                    return Err(fail("optimizer moments do not match the parameters".into()));
                }
                Some(AdamState {
                    step,
                    m: m.into_iter().map(|x| x.1).collect(),
                    v: v.into_iter().map(|x| x.1).collect(),
                })
            }
        };
        Ok(Self {
            model: header.model,
            schedule: header.schedule,
            train: header.train,
            seed: header.seed,
            step: header.step,
            params,
            adam,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        fs::write(path, bytes).map_err(|e| CoreError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| CoreError::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}
