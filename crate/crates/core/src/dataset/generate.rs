//! Demonstration generation with the scripted expert. Only successful
//! episodes are kept.

use std::collections::BTreeMap;

use log::{debug, info};
use rand::Rng;
use serde::{Deserialize, Serialize};
use xdisp_sim::{
    build_mesh, generate_cloth, sample_anchor_pose, AnchorSpec, ClothSpec, Episode, EpisodeConfig,
    PseudoExpert, Regime,
};

use super::io::DemoSet;
use super::record::{DemoRecord, RecordMeta};
use crate::error::{CoreError, Result};
use crate::rng::{stream_rng, TAG_DEMO};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ClothSource {
    /// The same cloth in every scene.
    Fixed(ClothSpec),
    /// A freshly generated cloth per scene.
    Random { num_holes: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub regime: Regime,
    pub cloth: ClothSource,
    /// Number of scenes to collect.
    pub scenes: usize,
    /// Demonstrate every hole of each scene's cloth (one record per hole)
    /// instead of only the first.
    pub all_holes: bool,
    pub anchor_points: usize,
    pub seed: u64,
    /// Scene attempts allowed before giving up.
    pub max_attempts: usize,
    pub episode: EpisodeConfig,
}

impl GenConfig {
    pub fn new(regime: Regime, cloth: ClothSource, scenes: usize, seed: u64) -> Self {
        Self {
            regime,
            cloth,
            scenes,
            all_holes: false,
            anchor_points: 512,
            seed,
            max_attempts: 4 * scenes + 10,
            episode: EpisodeConfig::default(),
        }
    }
}

/// Runs one scene; `None` if any requested hole's demonstration failed.
fn scene<R: Rng>(cfg: &GenConfig, rng: &mut R) -> Result<Option<Vec<DemoRecord>>> {
    let cloth = match &cfg.cloth {
        ClothSource::Fixed(spec) => spec.clone(),
        ClothSource::Random { num_holes } => generate_cloth(rng, *num_holes)?,
    };
    let pose = sample_anchor_pose(rng, cfg.regime);
    let anchor = AnchorSpec::new(pose);
    let mesh = build_mesh(&cloth)?;
    let episode = Episode::settle(&mesh, &anchor, &cfg.episode)?;
    let p_a = episode.initial_cloud();
    let p_b = anchor.sample_cloud(rng, cfg.anchor_points);
    let holes = if cfg.all_holes { mesh.loops.len() } else { 1 };
    let mut out = Vec::with_capacity(holes);
    for hole in 0..holes {
        let mut expert = PseudoExpert::new(
            episode.state(),
            &anchor,
            &mesh.loops[hole],
            &cfg.episode.policy,
        )?;
        let result = episode.clone().run(&mut expert)?;
        if !result.success {
            debug!("hole {hole} demonstration failed");
            return Ok(None);
        }
        out.push(DemoRecord {
            p_a: p_a.clone(),
            p_a_goal: result.pre_release,
            p_b: p_b.clone(),
            meta: RecordMeta {
                cloth: cloth.clone(),
                anchor_pose: pose,
                gripper_indices: mesh.gripper_vertices,
                loop_vertex_ids: mesh.loops.clone(),
                hole,
                goal: anchor.goal(),
            },
        });
    }
    Ok(Some(out))
}

pub fn generate_demos(cfg: &GenConfig) -> Result<DemoSet> {
    let mut records = Vec::new();
    let mut kept = 0;
    let mut attempt = 0;
    while kept < cfg.scenes {
        if attempt >= cfg.max_attempts {
            return Err(CoreError::Config(format!(
                "only {kept} of {} scenes succeeded within {} attempts",
                cfg.scenes, cfg.max_attempts
            )));
        }
        let mut rng = stream_rng(cfg.seed, TAG_DEMO, attempt as u64);
        attempt += 1;
        if let Some(recs) = scene(cfg, &mut rng)? {
            records.extend(recs);
            kept += 1;
            info!("scene {kept}/{} kept after {attempt} attempts", cfg.scenes);
        }
    }
    let mut meta = BTreeMap::new();
    meta.insert("regime".into(), cfg.regime.to_string());
    meta.insert("seed".into(), cfg.seed.to_string());
    meta.insert("scenes".into(), cfg.scenes.to_string());
    meta.insert("attempts".into(), attempt.to_string());
    meta.insert("all_holes".into(), cfg.all_holes.to_string());
    Ok(DemoSet { meta, records })
}
