//! Helpers shared by the commands: presets, scene setup, model loading and
//! cloud files.

use std::fs;
use std::path::Path;

use anyhow::Context;
use xdisp_core::checkpoint::Checkpoint;
use xdisp_core::dataset::ClothSource;
use xdisp_core::diffusion::NoiseSchedule;
use xdisp_core::model::Dit;
use xdisp_core::predict::prediction_subset;
use xdisp_sim::{
    build_mesh, AnchorSpec, ClothMesh, ClothSpec, Episode, EpisodeConfig, Regime, Scenario, Vec3,
};

use crate::config::{invalid, CliResult};

/// Named data-generation setups.
#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub cloth: ClothSource,
    pub all_holes: bool,
    /// Scenes per regime: train, unseen, ood.
    pub scenes: [usize; 3],
}

impl Preset {
    pub fn named(name: &str) -> CliResult<Self> {
        match name {
            "simple" => Ok(Self {
                cloth: ClothSource::Fixed(ClothSpec::fixed()),
                all_holes: false,
                scenes: [16, 40, 40],
            }),
            "unimodal" => Ok(Self {
                cloth: ClothSource::Random { num_holes: 1 },
                all_holes: false,
                scenes: [64, 40, 40],
            }),
            "multimodal" => Ok(Self {
                cloth: ClothSource::Random { num_holes: 2 },
                all_holes: true,
                scenes: [32, 20, 20],
            }),
            other => Err(invalid(format!(
                "unknown preset '{other}' (simple, unimodal, multimodal)"
            ))),
        }
    }

    pub fn scenes_for(&self, regime: Regime) -> usize {
        match regime {
            Regime::Train => self.scenes[0],
            Regime::Unseen => self.scenes[1],
            Regime::Ood => self.scenes[2],
        }
    }
}

pub fn parse_regime(s: &str) -> CliResult<Regime> {
    s.parse().map_err(invalid)
}

/// A settled scene as the policy sees it.
pub struct Observed {
    pub mesh: ClothMesh,
    pub anchor: AnchorSpec,
    pub episode: Episode,
    pub p_a: Vec<Vec3>,
}

pub fn observe(
    cloth: &ClothSpec,
    anchor: AnchorSpec,
    cfg: &EpisodeConfig,
) -> anyhow::Result<Observed> {
    let mesh = build_mesh(cloth).context("building cloth mesh")?;
    let episode = Episode::settle(&mesh, &anchor, cfg).context("settling scene")?;
    let p_a = episode.initial_cloud();
    Ok(Observed {
        mesh,
        anchor,
        episode,
        p_a,
    })
}

pub fn read_scenario(path: &Path) -> CliResult<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Scenario::parse(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

pub struct Loaded {
    pub model: Dit,
    pub schedule: NoiseSchedule,
}

pub fn load_model(path: &Path) -> CliResult<Loaded> {
    let checkpoint = Checkpoint::load(path).map_err(|e| invalid(format!("checkpoint: {e}")))?;
    let model = checkpoint
        .build_model()
        .map_err(|e| invalid(format!("checkpoint {}: {e}", path.display())))?;
    let schedule = NoiseSchedule::new(checkpoint.schedule)
        .map_err(|e| invalid(format!("checkpoint {}: {e}", path.display())))?;
    Ok(Loaded { model, schedule })
}

/// Points the model predicts on: all of them when `action_points` is unset,
/// otherwise an FPS subset that always includes the gripped vertices.
pub fn subset(
    p_a: &[Vec3],
    action_points: Option<usize>,
    grippers: &[usize],
) -> anyhow::Result<Vec<usize>> {
    match action_points {
        None => Ok((0..p_a.len()).collect()),
        Some(k) => Ok(prediction_subset(p_a, k, grippers)?),
    }
}

pub fn write_cloud_csv(path: &Path, cloud: &[Vec3]) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["point", "x", "y", "z"])?;
    for (i, p) in cloud.iter().enumerate() {
        w.serialize((i, p[0], p[1], p[2]))?;
    }
    w.flush()?;
    Ok(())
}

pub fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    Ok(())
}
