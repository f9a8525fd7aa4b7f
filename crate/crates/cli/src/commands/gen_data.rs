//! `gen-data`: collect successful expert demonstrations into a dataset
//! directory.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use log::info;
use serde::{Deserialize, Serialize};
use xdisp_core::dataset::{generate_demos, save_dataset, GenConfig};

use crate::common::{parse_regime, Preset};
use crate::config::{invalid, resolve, write_resolved, CliResult, Paths};

#[derive(Args, Debug, Serialize)]
pub struct GenDataArgs {
    /// Dataset directory to create.
    #[arg(long)]
    out: Option<PathBuf>,
    /// simple, unimodal or multimodal.
    #[arg(long)]
    preset: Option<String>,
    /// train, unseen or ood.
    #[arg(long)]
    regime: Option<String>,
    /// Scene count; defaults to the preset's count for the regime.
    #[arg(long)]
    scenes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    anchor_points: Option<usize>,
    /// Scene attempts before giving up.
    #[arg(long)]
    max_attempts: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenDataConfig {
    pub out: PathBuf,
    pub preset: String,
    pub regime: String,
    pub scenes: Option<usize>,
    pub seed: u64,
    pub anchor_points: usize,
    pub max_attempts: Option<usize>,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::new(),
            preset: "unimodal".into(),
            regime: "train".into(),
            scenes: None,
            seed: 0,
            anchor_points: 512,
            max_attempts: None,
        }
    }
}

pub fn run(args: GenDataArgs, file: Option<&std::path::Path>, paths: &Paths) -> CliResult<()> {
    let cfg: GenDataConfig = resolve(file, &args)?;
    let out = paths.required(&cfg.out, "out")?;
    let preset = Preset::named(&cfg.preset)?;
    let regime = parse_regime(&cfg.regime)?;
    let scenes = cfg.scenes.unwrap_or_else(|| preset.scenes_for(regime));
    if scenes == 0 || cfg.anchor_points == 0 {
        return Err(invalid("scenes and anchor_points must be positive"));
    }
    let mut gen = GenConfig::new(regime, preset.cloth, scenes, cfg.seed);
    gen.all_holes = preset.all_holes;
    gen.anchor_points = cfg.anchor_points;
    if let Some(m) = cfg.max_attempts {
        gen.max_attempts = m;
    }
    info!(
        "generating {scenes} {regime} scenes ({} preset)",
        cfg.preset
    );
    let mut set = generate_demos(&gen).context("generating demonstrations")?;
    set.meta.insert("preset".into(), cfg.preset.clone());
    save_dataset(&set, &out).with_context(|| format!("saving dataset to {}", out.display()))?;
    write_resolved(&cfg, &out.join("config.toml"))?;
    info!("wrote {} records to {}", set.records.len(), out.display());
    Ok(())
}
