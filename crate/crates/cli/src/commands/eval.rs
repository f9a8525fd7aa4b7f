//! `eval`: closed-loop success over seeded trials and goal-prediction
//! errors against held-out demonstrations, written as a metrics CSV.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use log::info;
use serde::{Deserialize, Serialize};
use xdisp_core::dataset::{fps_downsample, gather, load_dataset, ClothSource, DemoSet};
use xdisp_core::metrics::{
    coverage_rmse, precision_rmse, rmse, success_fraction, write_metrics_csv, CoverageCase,
    MetricRow, PrecisionGroup,
};
use xdisp_core::predict::sample_dense;
use xdisp_core::rng::{stream_rng, TAG_TRIAL};
use xdisp_sim::{
    generate_cloth, sample_anchor_pose, AnchorSpec, EpisodeConfig, EvalPolicy, PseudoExpert,
    Regime, Vec3,
};

use crate::common::{ensure_parent, load_model, observe, parse_regime, subset, Loaded, Preset};
use crate::config::{beside, invalid, resolve, write_resolved, CliResult, Paths};

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    /// Model to evaluate. Without it only the expert row is produced.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Anchor-pose regime for the trials: train, unseen or ood.
    #[arg(long)]
    regime: Option<String>,
    /// Closed-loop episodes (0 skips them).
    #[arg(long)]
    trials: Option<usize>,
    /// Cloth distribution for the trials: simple, unimodal or multimodal.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Predictions per held-out scene.
    #[arg(long)]
    n_samples: Option<usize>,
    /// Held-out demonstrations for the RMSE metrics.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    action_points: Option<usize>,
    #[arg(long)]
    anchor_points: Option<usize>,
    /// Also run the expert on every trial (the `oracle` row).
    #[arg(long)]
    oracle: Option<bool>,
    /// Output CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub checkpoint: Option<PathBuf>,
    pub regime: String,
    pub trials: usize,
    pub preset: String,
    pub seed: u64,
    pub n_samples: usize,
    pub data: Option<PathBuf>,
    pub action_points: Option<usize>,
    pub anchor_points: usize,
    pub oracle: bool,
    pub out: PathBuf,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            regime: "unseen".into(),
            trials: 40,
            preset: "unimodal".into(),
            seed: 0,
            n_samples: 20,
            data: None,
            action_points: None,
            anchor_points: 512,
            oracle: true,
            out: PathBuf::new(),
        }
    }
}

struct Trials {
    model: Vec<bool>,
    oracle: Vec<bool>,
}

fn run_trials(
    cfg: &EvalConfig,
    regime: Regime,
    preset: &Preset,
    model: Option<&Loaded>,
) -> anyhow::Result<Trials> {
    let ep_cfg = EpisodeConfig::default();
    let mut out = Trials {
        model: Vec::new(),
        oracle: Vec::new(),
    };
    for i in 0..cfg.trials {
        let mut rng = stream_rng(cfg.seed, TAG_TRIAL, i as u64);
        let cloth = match &preset.cloth {
            ClothSource::Fixed(spec) => spec.clone(),
            ClothSource::Random { num_holes } => generate_cloth(&mut rng, *num_holes)?,
        };
        let anchor = AnchorSpec::new(sample_anchor_pose(&mut rng, regime));
        let obs = observe(&cloth, anchor, &ep_cfg)?;
        if let Some(l) = model {
            let p_b = obs.anchor.sample_cloud(&mut rng, cfg.anchor_points);
            let grippers = obs.mesh.gripper_vertices;
            let sub = subset(&obs.p_a, cfg.action_points, &grippers)?;
            let pred = sample_dense(
                &l.model,
                &l.schedule,
                &obs.p_a,
                &p_b,
                &sub,
                cfg.seed,
                i as u64,
            )?;
            let mut policy =
                EvalPolicy::new(obs.episode.state(), &pred, &grippers, &ep_cfg.policy)?;
            out.model
                .push(obs.episode.clone().run(&mut policy)?.success);
        }
        if cfg.oracle {
            let mut expert = PseudoExpert::new(
                obs.episode.state(),
                &obs.anchor,
                &obs.mesh.loops[0],
                &ep_cfg.policy,
            )?;
            out.oracle
                .push(obs.episode.clone().run(&mut expert)?.success);
        }
        info!(
            "trial {}/{}: model {:?} oracle {:?}",
            i + 1,
            cfg.trials,
            out.model.last(),
            out.oracle.last()
        );
    }
    Ok(out)
}

/// Prediction errors against held-out records. Records sharing a cloth and
/// anchor pose form one scene; its valid goals are all of their goals.
fn heldout_metrics(
    cfg: &EvalConfig,
    set: &DemoSet,
    l: &Loaded,
) -> anyhow::Result<[(f64, usize); 3]> {
    let mut scenes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in set.records.iter().enumerate() {
        let key = serde_json::to_string(&(&r.meta.cloth, &r.meta.anchor_pose))?;
        scenes.entry(key).or_default().push(i);
    }
    let mut cases = Vec::new();
    let mut groups = Vec::new();
    let (mut sum, mut count) = (0.0, 0usize);
    // Scene order follows the first record of each scene.
    let mut ordered: Vec<Vec<usize>> = scenes.into_values().collect();
    ordered.sort_by_key(|g| g[0]);
    for (s, members) in ordered.iter().enumerate() {
        let r = &set.records[members[0]];
        let ib = fps_downsample(&r.p_b, cfg.anchor_points.min(r.p_b.len()), 0)?;
        let p_b = gather(&r.p_b, &ib);
        let sub = subset(&r.p_a, cfg.action_points, &r.meta.gripper_indices)?;
        let preds: Vec<Vec<Vec3>> = (0..cfg.n_samples)
            .map(|k| {
                sample_dense(
                    &l.model,
                    &l.schedule,
                    &r.p_a,
                    &p_b,
                    &sub,
                    cfg.seed,
                    (s * cfg.n_samples + k) as u64,
                )
            })
            .collect::<Result<_, _>>()?;
        let references: Vec<Vec<Vec3>> = members
            .iter()
            .map(|&m| set.records[m].p_a_goal.clone())
            .collect();
        for gt in &references {
            for p in &preds {
                sum += rmse(p, gt)?;
                count += 1;
            }
            cases.push(CoverageCase {
                gt: gt.clone(),
                predictions: preds.clone(),
            });
        }
        groups.push(PrecisionGroup {
            references,
            predictions: preds,
        });
        info!("held-out scene {}/{}", s + 1, ordered.len());
    }
    let n_cases = cases.len();
    let n_groups = groups.len();
    Ok([
        (sum / count as f64, n_cases),
        (coverage_rmse(&cases)?, n_cases),
        (precision_rmse(&groups)?, n_groups),
    ])
}

pub fn run(args: EvalArgs, file: Option<&Path>, paths: &Paths) -> CliResult<()> {
    let cfg: EvalConfig = resolve(file, &args)?;
    let out = paths.required(&cfg.out, "out")?;
    let regime = parse_regime(&cfg.regime)?;
    let preset = Preset::named(&cfg.preset)?;
    if cfg.n_samples == 0 || cfg.anchor_points == 0 || cfg.action_points == Some(0) {
        return Err(invalid(
            "n_samples, anchor_points and action_points must be positive",
        ));
    }
    let loaded = cfg
        .checkpoint
        .as_ref()
        .map(|p| load_model(&paths.resolve(p)))
        .transpose()?;
    let data = match &cfg.data {
        Some(p) => {
            Some(load_dataset(&paths.resolve(p)).map_err(|e| invalid(format!("dataset: {e}")))?)
        }
        None => None,
    };
    if data.is_some() && loaded.is_none() {
        return Err(invalid("held-out metrics need a checkpoint"));
    }
    if loaded.is_none() && !(cfg.oracle && cfg.trials > 0) {
        return Err(invalid(
            "nothing to evaluate: give a checkpoint or enable oracle trials",
        ));
    }
    let variant = loaded
        .as_ref()
        .map_or("none", |l| l.model.config().variant.name());
    let row = |regime: &str, variant: &str, metric: &str, value: f64, n: usize| MetricRow {
        regime: regime.to_string(),
        variant: variant.to_string(),
        metric: metric.to_string(),
        value,
        n,
        seed: cfg.seed,
    };

    let mut rows = Vec::new();
    if cfg.trials > 0 {
        let t = run_trials(&cfg, regime, &preset, loaded.as_ref())?;
        let r = regime.to_string();
        if loaded.is_some() {
            rows.push(row(
                &r,
                variant,
                "success_rate",
                success_fraction(&t.model).context("success")?,
                t.model.len(),
            ));
        }
        if cfg.oracle {
            rows.push(row(
                &r,
                "oracle",
                "success_rate",
                success_fraction(&t.oracle).context("success")?,
                t.oracle.len(),
            ));
        }
    }
    if let (Some(set), Some(l)) = (&data, &loaded) {
        let r = set
            .meta
            .get("regime")
            .cloned()
            .unwrap_or_else(|| "heldout".into());
        let [m, c, p] = heldout_metrics(&cfg, set, l)?;
        rows.push(row(&r, variant, "rmse", m.0, m.1));
        rows.push(row(&r, variant, "coverage_rmse", c.0, c.1));
        rows.push(row(&r, variant, "precision_rmse", p.0, p.1));
    }
    ensure_parent(&out)?;
    let f = File::create(&out).with_context(|| format!("writing {}", out.display()))?;
    write_metrics_csv(f, &rows).context("writing metrics")?;
    write_resolved(&cfg, &beside(&out))?;
    for r in &rows {
        info!(
            "{} {} {} = {:.6} (n = {})",
            r.regime, r.variant, r.metric, r.value, r.n
        );
    }
    Ok(())
}
