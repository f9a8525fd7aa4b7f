use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// What the network diffuses (or regresses) per action point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Displacement,
    Position,
}

/// Where clouds are expressed before entering the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// Action centered on its own mean, anchor and goal on the anchor mean.
    Object,
    World,
    /// One merged cloud centered on the mean of all scene points.
    Scene,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "CD")]
    Cd,
    #[serde(rename = "CP")]
    Cp,
    #[serde(rename = "SD")]
    Sd,
    #[serde(rename = "SP")]
    Sp,
    #[serde(rename = "CD-W")]
    CdW,
    #[serde(rename = "CP-W")]
    CpW,
    #[serde(rename = "CD-NAC")]
    CdNac,
    #[serde(rename = "CP-NAC")]
    CpNac,
    #[serde(rename = "RD")]
    Rd,
    #[serde(rename = "RP")]
    Rp,
}

impl Variant {
    pub const ALL: [Variant; 10] = [
        Variant::Cd,
        Variant::Cp,
        Variant::Sd,
        Variant::Sp,
        Variant::CdW,
        Variant::CpW,
        Variant::CdNac,
        Variant::CpNac,
        Variant::Rd,
        Variant::Rp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cd => "CD",
            Variant::Cp => "CP",
            Variant::Sd => "SD",
            Variant::Sp => "SP",
            Variant::CdW => "CD-W",
            Variant::CpW => "CP-W",
            Variant::CdNac => "CD-NAC",
            Variant::CpNac => "CP-NAC",
            Variant::Rd => "RD",
            Variant::Rp => "RP",
        }
    }

    pub fn target(self) -> Target {
        match self {
            Variant::Cd | Variant::Sd | Variant::CdW | Variant::CdNac | Variant::Rd => {
                Target::Displacement
            }
            _ => Target::Position,
        }
    }

    pub fn frame(self) -> Frame {
        match self {
            Variant::Sd | Variant::Sp => Frame::Scene,
            Variant::CdW | Variant::CpW => Frame::World,
            _ => Frame::Object,
        }
    }

    /// Whether initial action-point features are concatenated to the
    /// diffused-variable features.
    pub fn action_context(self) -> bool {
        !matches!(self, Variant::CdNac | Variant::CpNac)
    }

    /// Regression baselines: no timestep, one 3-channel output.
    pub fn is_regression(self) -> bool {
        matches!(self, Variant::Rd | Variant::Rp)
    }

    pub fn cross_attention(self) -> bool {
        self.frame() != Frame::Scene
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == up)
            .ok_or_else(|| CoreError::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub depth: usize,
    pub num_heads: usize,
    pub hidden_size: usize,
    /// Width of the hidden layer in each point encoder.
    pub encoder_width: usize,
    pub mlp_ratio: usize,
    /// Sinusoidal timestep features before the embedding MLP.
    pub frequency_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::new(Variant::Cd)
    }
}

impl ModelConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            depth: 5,
            num_heads: 4,
            hidden_size: 128,
            encoder_width: 64,
            mlp_ratio: 4,
            frequency_dim: 128,
        }
    }

    /// Width of the action tokens the blocks operate on.
    pub fn token_width(&self) -> usize {
        if self.variant.action_context() {
            2 * self.hidden_size
        } else {
            self.hidden_size
        }
    }

    pub fn out_channels(&self) -> usize {
        if self.variant.is_regression() {
            3
        } else {
            6
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoreError::Config(m));
        if self.hidden_size == 0 || self.num_heads == 0 || self.encoder_width == 0 {
            return bad("hidden_size, num_heads and encoder_width must be positive".into());
        }
        if !self.hidden_size.is_multiple_of(self.num_heads) {
            return bad(format!(
                "hidden_size {} not divisible by num_heads {}",
                self.hidden_size, self.num_heads
            ));
        }
        if self.mlp_ratio == 0 {
            return bad("mlp_ratio must be positive".into());
        }
        if self.frequency_dim < 2 || !self.frequency_dim.is_multiple_of(2) {
            return bad(format!(
                "frequency_dim must be even and >= 2, got {}",
                self.frequency_dim
            ));
        }
        Ok(())
    }
}
