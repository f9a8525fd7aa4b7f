//! Overfits one generated demonstration and reports loss and sample error.
//!
//! `cargo run --release -p xdisp-core --example overfit -- STEPS LR POINTS`

use std::time::Instant;

use xdisp_core::dataset::{generate_demos, ClothSource, GenConfig};
use xdisp_core::diffusion::make_linear_schedule;
use xdisp_core::metrics::rmse;
use xdisp_core::model::{Dit, ModelConfig, Variant};
use xdisp_core::predict::sample;
use xdisp_core::train::{prepare_examples, TrainConfig, Trainer};
use xdisp_sim::{ClothSpec, Regime};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let steps: u64 = args.first().map_or(Ok(2000), |s| s.parse())?;
    let lr: f64 = args.get(1).map_or(Ok(1e-3), |s| s.parse())?;
    let points: usize = args.get(2).map_or(Ok(32), |s| s.parse())?;
    let batch: usize = args.get(3).map_or(Ok(4), |s| s.parse())?;
    let variant: Variant = args.get(4).map_or(Ok(Variant::Cd), |s| s.parse())?;

    let mut gen = GenConfig::new(Regime::Train, ClothSource::Fixed(ClothSpec::fixed()), 1, 0);
    gen.anchor_points = 256;
    let set = generate_demos(&gen)?;
    let mut cfg = TrainConfig {
        learning_rate: lr,
        batch_size: batch,
        max_steps: Some(steps),
        augment: false,
        action_points: points,
        anchor_points: points,
        ..TrainConfig::default()
    };
    cfg.seed = 1;
    let examples = prepare_examples(&set, points, points)?;
    let ex = examples[0].clone();
    let mut mc = ModelConfig::new(variant);
    mc.hidden_size = 64;
    mc.depth = 3;
    let model = Dit::new(mc, 0)?;
    let schedule = make_linear_schedule(100)?;
    let mut tr = Trainer::new(model, schedule.clone(), cfg, examples)?;
    let t0 = Instant::now();
    let mut avg = 0.0;
    while !tr.finished() {
        let s = tr.train_step()?;
        avg += s.loss;
        if (s.step + 1) % 100 == 0 {
            let pred = sample(&tr.model, &schedule, &ex.p_a, &ex.p_b, 7)?;
            println!(
                "step {:5} loss {:.5} lr {:.2e} rmse {:.4} ({:.1}s)",
                s.step + 1,
                avg / 100.0,
                s.lr,
                rmse(&pred, &ex.p_a_goal)?,
                t0.elapsed().as_secs_f64()
            );
            avg = 0.0;
        }
    }
    Ok(())
}
