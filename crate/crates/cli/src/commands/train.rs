//! `train`: fit a model variant to a dataset, writing checkpoints and a
//! per-step loss log.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use log::{info, warn};
use serde::{Deserialize, Serialize};
use xdisp_core::checkpoint::Checkpoint;
use xdisp_core::dataset::load_dataset;
use xdisp_core::diffusion::{NoiseSchedule, ScheduleConfig, DEFAULT_LAMBDA, DEFAULT_STEPS};
use xdisp_core::model::{Dit, ModelConfig, Variant};
use xdisp_core::train::{prepare_examples, StepStats, TrainConfig, Trainer};

use crate::config::{invalid, resolve, write_resolved, CliResult, Paths};

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Dataset directory written by gen-data.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Run directory for checkpoints and the loss log.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue from this checkpoint. Model, schedule and optimizer settings
    /// come from the checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    num_heads: Option<usize>,
    #[arg(long)]
    encoder_width: Option<usize>,
    #[arg(long)]
    frequency_dim: Option<usize>,
    #[arg(long)]
    diffusion_steps: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    warmup_steps: Option<u64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Passes over the dataset.
    #[arg(long)]
    epochs: Option<u64>,
    /// Gradient steps; overrides --epochs.
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Weight of the variational term in the hybrid loss.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    augment: Option<bool>,
    #[arg(long)]
    action_points: Option<usize>,
    #[arg(long)]
    anchor_points: Option<usize>,
    /// Write checkpoints/step_N.bin every this many steps (0 disables).
    #[arg(long)]
    checkpoint_every: Option<u64>,
    #[arg(long)]
    log_every: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRunConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub resume: Option<PathBuf>,
    pub variant: String,
    pub hidden_size: usize,
    pub depth: usize,
    pub num_heads: usize,
    pub encoder_width: usize,
    pub frequency_dim: usize,
    pub diffusion_steps: usize,
    pub learning_rate: f64,
    pub warmup_steps: u64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: u64,
    pub max_steps: Option<u64>,
    pub seed: u64,
    pub lambda: f64,
    pub augment: bool,
    pub action_points: usize,
    pub anchor_points: usize,
    pub checkpoint_every: u64,
    pub log_every: u64,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        Self {
            data: PathBuf::new(),
            out: PathBuf::new(),
            resume: None,
            variant: m.variant.name().into(),
            hidden_size: m.hidden_size,
            depth: m.depth,
            num_heads: m.num_heads,
            encoder_width: m.encoder_width,
            frequency_dim: m.frequency_dim,
            diffusion_steps: DEFAULT_STEPS,
            learning_rate: t.learning_rate,
            warmup_steps: t.warmup_steps,
            weight_decay: t.weight_decay,
            batch_size: t.batch_size,
            epochs: t.epochs,
            max_steps: t.max_steps,
            seed: t.seed,
            lambda: DEFAULT_LAMBDA,
            augment: t.augment,
            action_points: t.action_points,
            anchor_points: t.anchor_points,
            checkpoint_every: 1000,
            log_every: 100,
        }
    }
}

impl TrainRunConfig {
    fn model(&self) -> CliResult<ModelConfig> {
        let variant: Variant = self.variant.parse().map_err(|e| invalid(format!("{e}")))?;
        let mut m = ModelConfig::new(variant);
        m.hidden_size = self.hidden_size;
        m.depth = self.depth;
        m.num_heads = self.num_heads;
        m.encoder_width = self.encoder_width;
        m.frequency_dim = self.frequency_dim;
        m.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(m)
    }

    /// Takes the model, schedule and optimizer settings of a checkpoint
    /// being resumed, so the recorded config describes the actual run.
    fn adopt(&mut self, ck: &Checkpoint) {
        let (m, t) = (&ck.model, &ck.train);
        self.variant = m.variant.name().into();
        self.hidden_size = m.hidden_size;
        self.depth = m.depth;
        self.num_heads = m.num_heads;
        self.encoder_width = m.encoder_width;
        self.frequency_dim = m.frequency_dim;
        self.diffusion_steps = ck.schedule.steps;
        self.learning_rate = t.learning_rate;
        self.warmup_steps = t.warmup_steps;
        self.weight_decay = t.weight_decay;
        self.batch_size = t.batch_size;
        self.seed = t.seed;
        self.lambda = t.lambda;
        self.augment = t.augment;
        self.action_points = t.action_points;
        self.anchor_points = t.anchor_points;
    }

    fn train(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            warmup_steps: self.warmup_steps,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            epochs: self.epochs,
            max_steps: self.max_steps,
            seed: self.seed,
            lambda: self.lambda,
            augment: self.augment,
            action_points: self.action_points,
            anchor_points: self.anchor_points,
            ..TrainConfig::default()
        }
    }
}

fn save(trainer: &Trainer, schedule: ScheduleConfig, path: &Path) -> anyhow::Result<()> {
    Checkpoint::from_model(
        &trainer.model,
        schedule,
        &trainer.config,
        Some(&trainer.adam),
    )
    .save(path)
    .with_context(|| format!("saving {}", path.display()))
}

pub fn run(args: TrainArgs, file: Option<&Path>, paths: &Paths) -> CliResult<()> {
    let mut cfg: TrainRunConfig = resolve(file, &args)?;
    let data = paths.required(&cfg.data, "data")?;
    let out = paths.required(&cfg.out, "out")?;

    let (model, schedule_cfg, mut train_cfg, adam) = match &cfg.resume {
        Some(p) => {
            let path = paths.resolve(p);
            let ck = Checkpoint::load(&path).map_err(|e| invalid(format!("resume: {e}")))?;
            let model = ck
                .build_model()
                .map_err(|e| invalid(format!("resume: {e}")))?;
            let adam = ck
                .adam
                .clone()
                .ok_or_else(|| invalid(format!("{} has no optimizer state", path.display())))?;
            if model.config().variant.name() != cfg.variant.to_ascii_uppercase() {
                warn!(
                    "resuming a {} checkpoint; ignoring variant {}",
                    model.config().variant.name(),
                    cfg.variant
                );
            }
            cfg.adopt(&ck);
            (model, ck.schedule, ck.train.clone(), Some(adam))
        }
        None => {
            let m = cfg.model()?;
            let t = cfg.train();
            let model = Dit::new(m, t.seed).map_err(|e| invalid(e.to_string()))?;
            (model, ScheduleConfig::linear(cfg.diffusion_steps), t, None)
        }
    };
    // Run length may be extended on resume.
    if cfg.resume.is_some() {
        train_cfg.epochs = cfg.epochs;
        train_cfg.max_steps = cfg.max_steps;
    }
    train_cfg.validate().map_err(|e| invalid(e.to_string()))?;
    let schedule = NoiseSchedule::new(schedule_cfg).map_err(|e| invalid(e.to_string()))?;

    let set = load_dataset(&data).map_err(|e| invalid(format!("dataset: {e}")))?;
    let examples = prepare_examples(&set, train_cfg.action_points, train_cfg.anchor_points)
        .context("preparing examples")?;
    let mut trainer = match adam {
        Some(a) => Trainer::resume(model, schedule, train_cfg, examples, a),
        None => Trainer::new(model, schedule, train_cfg, examples),
    }
    .map_err(|e| invalid(e.to_string()))?;

    fs::create_dir_all(out.join("checkpoints"))
        .with_context(|| format!("creating {}", out.display()))?;
    write_resolved(&cfg, &out.join("config.toml"))?;
    let loss_path = out.join("loss.csv");
    let fresh = cfg.resume.is_none() || !loss_path.exists();
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(!fresh)
        .truncate(fresh)
        .open(&loss_path)
        .with_context(|| format!("opening {}", loss_path.display()))?;
    let mut log_csv = csv::WriterBuilder::new()
        .has_headers(fresh)
        .from_writer(file);

    info!(
        "training {} from step {} to {} on {} examples",
        trainer.model.config().variant.name(),
        trainer.step(),
        trainer.total_steps(),
        trainer.examples().len()
    );
    while !trainer.finished() {
        let stats: StepStats = trainer.train_step().context("training step")?;
        log_csv.serialize(stats).context("writing loss log")?;
        let done = trainer.step();
        if cfg.log_every > 0 && done % cfg.log_every == 0 {
            info!("step {done}: loss {:.6} (lr {:.3e})", stats.loss, stats.lr);
            log_csv.flush().context("writing loss log")?;
        }
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 {
            save(
                &trainer,
                schedule_cfg,
                &out.join(format!("checkpoints/step_{done:06}.bin")),
            )?;
        }
    }
    log_csv.flush().context("writing loss log")?;
    save(&trainer, schedule_cfg, &out.join("checkpoint.bin"))?;
    info!("finished at step {}", trainer.step());
    Ok(())
}
