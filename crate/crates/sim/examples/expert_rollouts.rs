//! Runs seeded pseudo-expert episodes on the fixed cloth and prints per-episode
//! diagnostics.
//!
//! `cargo run --release -p xdisp-sim --example expert_rollouts -- 20 train`
//!
//! Environment overrides: `KC` (contact stiffness), `MARGIN` (contact
//! margin), `PTOL` (polygon tolerance). `REPLAY=1` also replays each demo
//! through the evaluation policy using the demo's own goal cloud.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xdisp_sim::geom;
use xdisp_sim::{
    build_mesh, sample_anchor_pose, AnchorSpec, ClothSpec, Episode, EpisodeConfig, PseudoExpert,
    Regime,
};

fn main() {
    let mut args = std::env::args().skip(1);
    let n: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let regime: Regime = args
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(Regime::Train);
    let mut cfg = EpisodeConfig::default();
    if let Ok(k) = std::env::var("KC") {
        cfg.sim.contact_stiffness = k.parse().unwrap();
    }
    if let Ok(k) = std::env::var("PTOL") {
        cfg.polygon_tolerance = k.parse().unwrap();
    }
    if let Ok(k) = std::env::var("MARGIN") {
        cfg.sim.contact_margin = k.parse().unwrap();
    }
    let mesh = build_mesh(&ClothSpec::fixed()).expect("valid cloth");
    let mut wins = 0;
    let start = Instant::now();
    for seed in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let anchor = AnchorSpec::new(sample_anchor_pose(&mut rng, regime));
        let ep = Episode::settle(&mesh, &anchor, &cfg).expect("settle");
        let mut policy =
            PseudoExpert::new(ep.state(), &anchor, &mesh.loops[0], &cfg.policy).expect("policy");
        let r = ep.clone().run(&mut policy).expect("episode");
        if std::env::var("REPLAY").is_ok() {
            let mut ev = xdisp_sim::EvalPolicy::new(
                ep.state(),
                &r.pre_release,
                &mesh.gripper_vertices,
                &cfg.policy,
            )
            .unwrap();
            let r2 = ep.clone().run(&mut ev).unwrap();
            let c2 = geom::centroid(
                &mesh.loops[0]
                    .iter()
                    .map(|&v| r2.pre_release[v])
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            let gp: Vec<_> = mesh
                .gripper_vertices
                .iter()
                .map(|&v| geom::dist(r.pre_release[v], r2.pre_release[v]))
                .collect();
            println!(
                "  replay: pre-dist {:.3} grip-diff {:?} checks {:?}",
                geom::dist(c2, anchor.goal()),
                gp,
                r2.holes[0]
            );
        }
        let loop_pts = |pts: &[[f64; 3]]| {
            geom::centroid(&mesh.loops[0].iter().map(|&v| pts[v]).collect::<Vec<_>>()).unwrap()
        };
        let goal = anchor.goal();
        let pre = loop_pts(&r.pre_release);
        let post = loop_pts(&r.post_release);
        wins += r.success as usize;
        println!(
            "seed {seed:3} pose {:?} pre-dist {:.3} post-centroid-z {:.2} goal-z {:.2} checks {:?} ok {}",
            anchor.pose.translation.map(|v| (v * 100.0).round() / 100.0),
            geom::dist(pre, goal),
            post[2],
            goal[2],
            r.holes[0],
            r.success
        );
    }
    println!(
        "success {wins}/{n} in {:.1}s",
        start.elapsed().as_secs_f64()
    );
}
