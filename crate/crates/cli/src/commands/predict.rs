//! `predict`: sample goal clouds for one scene from a trained checkpoint.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use log::info;
use serde::{Deserialize, Serialize};
use xdisp_core::dataset::{fps_downsample, gather, load_dataset};
use xdisp_core::predict::sample_dense;
use xdisp_core::rng::{stream_rng, TAG_SCENE};
use xdisp_sim::{EpisodeConfig, Vec3};

use crate::common::{ensure_parent, load_model, observe, read_scenario, subset};
use crate::config::{beside, invalid, resolve, write_resolved, CliResult, Paths};

#[derive(Args, Debug, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Scenario file (key = value cloth and anchor description).
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Dataset to take the scene from instead of --scene.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Record index within --data.
    #[arg(long)]
    index: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Predict on this many points and carry the rest along with their
    /// nearest predicted neighbour. Defaults to every point.
    #[arg(long)]
    action_points: Option<usize>,
    #[arg(long)]
    anchor_points: Option<usize>,
    /// Output CSV (sample, point, x, y, z).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    pub checkpoint: PathBuf,
    pub scene: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub index: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub action_points: Option<usize>,
    pub anchor_points: usize,
    pub out: PathBuf,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            checkpoint: PathBuf::new(),
            scene: None,
            data: None,
            index: 0,
            n_samples: 20,
            seed: 0,
            action_points: None,
            anchor_points: 512,
            out: PathBuf::new(),
        }
    }
}

/// Action cloud, anchor cloud and gripped vertices of the requested scene.
pub fn scene_clouds(
    scene: Option<&Path>,
    data: Option<&Path>,
    index: usize,
    anchor_points: usize,
    seed: u64,
) -> CliResult<(Vec<Vec3>, Vec<Vec3>, Vec<usize>)> {
    match (scene, data) {
        (Some(path), None) => {
            let sc = read_scenario(path)?;
            let obs = observe(&sc.cloth, sc.anchor, &EpisodeConfig::default())?;
            let p_b = obs
                .anchor
                .sample_cloud(&mut stream_rng(seed, TAG_SCENE, 0), anchor_points);
            Ok((obs.p_a, p_b, obs.mesh.gripper_vertices.to_vec()))
        }
        (None, Some(dir)) => {
            let set = load_dataset(dir).map_err(|e| invalid(format!("dataset: {e}")))?;
            let rec = set.records.get(index).ok_or_else(|| {
                invalid(format!(
                    "index {index} out of range ({} records)",
                    set.records.len()
                ))
            })?;
            let ib = fps_downsample(&rec.p_b, anchor_points.min(rec.p_b.len()), 0)
                .context("anchor FPS")?;
            Ok((
                rec.p_a.clone(),
                gather(&rec.p_b, &ib),
                rec.meta.gripper_indices.to_vec(),
            ))
        }
        _ => Err(invalid("give exactly one of scene or data")),
    }
}

pub fn run(args: PredictArgs, file: Option<&Path>, paths: &Paths) -> CliResult<()> {
    let cfg: PredictConfig = resolve(file, &args)?;
    let ck_path = paths.required(&cfg.checkpoint, "checkpoint")?;
    let out = paths.required(&cfg.out, "out")?;
    if cfg.n_samples == 0 || cfg.anchor_points == 0 || cfg.action_points == Some(0) {
        return Err(invalid(
            "n_samples, anchor_points and action_points must be positive",
        ));
    }
    let loaded = load_model(&ck_path)?;
    let scene = cfg.scene.as_ref().map(|p| paths.resolve(p));
    let data = cfg.data.as_ref().map(|p| paths.resolve(p));
    let (p_a, p_b, grippers) = scene_clouds(
        scene.as_deref(),
        data.as_deref(),
        cfg.index,
        cfg.anchor_points,
        cfg.seed,
    )?;
    let sub = subset(&p_a, cfg.action_points, &grippers)?;

    ensure_parent(&out)?;
    let mut w =
        csv::Writer::from_path(&out).with_context(|| format!("writing {}", out.display()))?;
    w.write_record(["sample", "point", "x", "y", "z"])
        .context("writing predictions")?;
    for k in 0..cfg.n_samples {
        let pred = sample_dense(
            &loaded.model,
            &loaded.schedule,
            &p_a,
            &p_b,
            &sub,
            cfg.seed,
            k as u64,
        )
        .context("sampling")?;
        for (i, p) in pred.iter().enumerate() {
            w.serialize((k, i, p[0], p[1], p[2]))
                .context("writing predictions")?;
        }
        info!("sample {}/{}", k + 1, cfg.n_samples);
    }
    w.flush().context("writing predictions")?;
    write_resolved(&cfg, &beside(&out))?;
    Ok(())
}
