//! `rollout`: run one episode with the expert or a trained model and save
//! the resulting cloth states.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use log::info;
use serde::{Deserialize, Serialize};
use xdisp_core::predict::sample_dense;
use xdisp_core::rng::{stream_rng, TAG_SCENE};
use xdisp_sim::{EpisodeConfig, EvalPolicy, Policy, PseudoExpert};

use crate::common::{load_model, observe, read_scenario, subset, write_cloud_csv};
use crate::config::{invalid, resolve, write_resolved, CliResult, Paths};

#[derive(Args, Debug, Serialize)]
pub struct RolloutArgs {
    /// Scenario file.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Drive the episode with this model's prediction; the expert otherwise.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Hole the expert aims for.
    #[arg(long)]
    hole: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    action_points: Option<usize>,
    #[arg(long)]
    anchor_points: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutConfig {
    pub scene: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub hole: usize,
    pub seed: u64,
    pub action_points: Option<usize>,
    pub anchor_points: usize,
    pub out: PathBuf,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            scene: PathBuf::new(),
            checkpoint: None,
            hole: 0,
            seed: 0,
            action_points: None,
            anchor_points: 512,
            out: PathBuf::new(),
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    policy: &'a str,
    success: bool,
    holes: &'a [xdisp_sim::success::HoleCheck],
    manipulation_sim_steps: usize,
    release_sim_steps: usize,
}

pub fn run(args: RolloutArgs, file: Option<&Path>, paths: &Paths) -> CliResult<()> {
    let cfg: RolloutConfig = resolve(file, &args)?;
    let scene = paths.required(&cfg.scene, "scene")?;
    let out = paths.required(&cfg.out, "out")?;
    if cfg.anchor_points == 0 || cfg.action_points == Some(0) {
        return Err(invalid("point counts must be positive"));
    }
    let sc = read_scenario(&scene)?;
    let ep_cfg = EpisodeConfig::default();
    let loaded = cfg
        .checkpoint
        .as_ref()
        .map(|p| load_model(&paths.resolve(p)))
        .transpose()?;
    let obs = observe(&sc.cloth, sc.anchor, &ep_cfg)?;
    if cfg.hole >= obs.mesh.loops.len() {
        return Err(invalid(format!(
            "hole {} but the cloth has {}",
            cfg.hole,
            obs.mesh.loops.len()
        )));
    }
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let (name, mut policy): (String, Box<dyn Policy>) = match &loaded {
        Some(l) => {
            let p_b = obs
                .anchor
                .sample_cloud(&mut stream_rng(cfg.seed, TAG_SCENE, 0), cfg.anchor_points);
            let grippers = obs.mesh.gripper_vertices;
            let sub = subset(&obs.p_a, cfg.action_points, &grippers)?;
            let pred = sample_dense(&l.model, &l.schedule, &obs.p_a, &p_b, &sub, cfg.seed, 0)
                .context("sampling")?;
            write_cloud_csv(&out.join("prediction.csv"), &pred)?;
            let policy = EvalPolicy::new(obs.episode.state(), &pred, &grippers, &ep_cfg.policy)
                .context("building evaluation policy")?;
            (
                l.model.config().variant.name().to_string(),
                Box::new(policy),
            )
        }
        None => {
            let expert = PseudoExpert::new(
                obs.episode.state(),
                &obs.anchor,
                &obs.mesh.loops[cfg.hole],
                &ep_cfg.policy,
            )
            .context("building expert")?;
            ("expert".to_string(), Box::new(expert))
        }
    };
    let result = obs
        .episode
        .run(policy.as_mut())
        .context("running episode")?;
    info!("{name} rollout: success {}", result.success);
    write_cloud_csv(&out.join("pre_release.csv"), &result.pre_release)?;
    write_cloud_csv(&out.join("post_release.csv"), &result.post_release)?;
    let summary = Summary {
        policy: &name,
        success: result.success,
        holes: &result.holes,
        manipulation_sim_steps: result.manipulation_sim_steps,
        release_sim_steps: result.release_sim_steps,
    };
    let json = serde_json::to_string_pretty(&summary).context("serializing result")?;
    fs::write(out.join("result.json"), json + "\n").context("writing result.json")?;
    write_resolved(&cfg, &out.join("config.toml"))?;
    Ok(())
}
