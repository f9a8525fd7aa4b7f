use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xdisp_sim::geom::{self, point_in_polygon};
use xdisp_sim::physics::{Phase, SimState};
use xdisp_sim::policy::{evaluation_targets, HoldPolicy};
use xdisp_sim::success::{centroid_check, CENTROID_THRESHOLD};
use xdisp_sim::*;

fn fast_config() -> EpisodeConfig {
    EpisodeConfig {
        settle_steps: 240,
        ..EpisodeConfig::default()
    }
}

/// Winding number of a closed polygon around `q`, accumulated from signed
/// crossings of the horizontal line through `q`.
fn winding_number(q: [f64; 2], poly: &[[f64; 2]]) -> i32 {
    let mut w = 0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let side = (b[0] - a[0]) * (q[1] - a[1]) - (q[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= q[1] {
            if b[1] > q[1] && side > 0.0 {
                w += 1;
            }
        } else if b[1] <= q[1] && side < 0.0 {
            w -= 1;
        }
    }
    w
}

#[test]
fn point_in_polygon_agrees_with_winding_number() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 10_000 {
        // Star-shaped polygons: simple by construction.
        let n = rng.gen_range(3..12);
        let mut angles: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        angles.sort_by(f64::total_cmp);
        let poly: Vec<[f64; 2]> = angles
            .iter()
            .map(|a| {
                let r = rng.gen_range(0.2..2.0);
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        let q = [rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5)];
        if geom::polygon_boundary_distance(q, &poly) < 1e-9 {
            continue;
        }
        let inside = winding_number(q, &poly) != 0;
        assert_eq!(point_in_polygon(q, &poly), inside, "q={q:?} poly={poly:?}");
        checked += 1;
    }
}

#[test]
fn generator_never_emits_invalid_specs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..10_000 {
        let spec = generate_cloth(&mut rng, 1 + k % 2).unwrap();
        assert!(spec.validate().is_ok(), "{spec:?}");
        for h in &spec.holes {
            assert!((5..=7).contains(&(h.x1 - h.x0)));
            assert!((5..=7).contains(&(h.y1 - h.y0)));
        }
    }
}

#[test]
fn generator_rejects_bad_hole_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert!(generate_cloth(&mut rng, 3).is_err());
}

#[test]
fn anchor_poses_respect_regime_ranges() {
    for regime in [Regime::Train, Regime::Unseen, Regime::Ood] {
        let mut rng = ChaCha8Rng::seed_from_u64(regime as u64 + 1);
        for _ in 0..10_000 {
            let p = sample_anchor_pose(&mut rng, regime);
            let [x, y, z] = p.translation;
            let r = p.rotation_z;
            assert!(r.abs() < std::f64::consts::FRAC_PI_3);
            assert!(y > -10.0 && y <= 0.0);
            if r >= 0.0 {
                assert!(x >= 0.0);
            } else {
                assert!(x <= 0.0);
            }
            match regime {
                Regime::Ood => {
                    assert!(x.abs() > 5.0 && x.abs() < 10.0);
                    assert!(z > 1.0 && z < 5.0);
                }
                _ => {
                    assert!(x.abs() < 5.0);
                    assert_eq!(z, 0.0);
                }
            }
        }
    }
}

#[test]
fn hole_removes_exactly_its_interior() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in 0..200 {
        let spec = generate_cloth(&mut rng, 1 + k % 2).unwrap();
        let mesh = build_mesh(&spec).unwrap();
        let n = spec.node_density;
        // Direct grid enumeration.
        let mut removed = 0;
        for j in 0..n {
            for i in 0..n {
                if spec
                    .holes
                    .iter()
                    .any(|h| i > h.x0 && i < h.x1 && j > h.y0 && j < h.y1)
                {
                    removed += 1;
                }
            }
        }
        let closed_form: usize = spec
            .holes
            .iter()
            .map(|h| (h.x1 - h.x0 - 1) * (h.y1 - h.y0 - 1))
            .sum();
        assert_eq!(removed, closed_form);
        assert_eq!(mesh.num_vertices(), n * n - removed);
    }
}

#[test]
fn loop_vertices_border_removed_cells_in_order() {
    let spec = ClothSpec::fixed();
    let mesh = build_mesh(&spec).unwrap();
    let lp = &mesh.loops[0];
    assert_eq!(lp.len(), 2 * (8 + 4));
    for (k, &v) in lp.iter().enumerate() {
        let (i, j) = mesh.grid[v];
        let has_removed_neighbor = (-1isize..=1).any(|di| {
            (-1isize..=1).any(|dj| {
                mesh.vertex_at((i as isize + di) as usize, (j as isize + dj) as usize)
                    .is_none()
            })
        });
        assert!(has_removed_neighbor, "loop vertex {v} at {:?}", (i, j));
        // Consecutive loop vertices are grid neighbours.
        let (i2, j2) = mesh.grid[lp[(k + 1) % lp.len()]];
        assert_eq!(i.abs_diff(i2) + j.abs_diff(j2), 1);
    }
}

#[test]
fn springs_never_touch_removed_vertices() {
    let mesh = build_mesh(&ClothSpec::fixed()).unwrap();
    for s in &mesh.springs {
        assert!(s.a < mesh.num_vertices() && s.b < mesh.num_vertices());
        assert!(s.rest > 0.0);
    }
}

#[test]
fn energy_is_non_increasing_without_control() {
    let mesh = build_mesh(&ClothSpec::fixed()).unwrap();
    let anchor = AnchorSpec::new(AnchorPose::IDENTITY);
    let mut sim = Simulator::new(&mesh, anchor.capsules().to_vec(), SimParams::default());
    sim.release();
    let mut e = sim.energy();
    for step in 0..1000 {
        sim.step(&[]).unwrap();
        let e2 = sim.energy();
        assert!(
            e2 <= e + 1e-9 * e.abs().max(1.0),
            "energy rose at step {step}: {e} -> {e2}"
        );
        e = e2;
    }
}

#[test]
fn simulation_is_deterministic() {
    let mesh = build_mesh(&ClothSpec::fixed()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let anchor = AnchorSpec::new(sample_anchor_pose(&mut rng, Regime::Train));
    let cfg = EpisodeConfig {
        settle_steps: 60,
        manipulation_steps: 30,
        release_steps: 40,
        ..EpisodeConfig::default()
    };
    let run = || {
        let ep = Episode::settle(&mesh, &anchor, &cfg).unwrap();
        let mut pol = PseudoExpert::new(ep.state(), &anchor, &mesh.loops[0], &cfg.policy).unwrap();
        ep.run(&mut pol).unwrap()
    };
    let (a, b) = (run(), run());
    let bits = |v: &[Vec3]| v.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.pre_release), bits(&b.pre_release));
    assert_eq!(bits(&a.post_release), bits(&b.post_release));
}

#[test]
fn phase_lengths_are_fixed() {
    let mesh = build_mesh(&ClothSpec::fixed()).unwrap();
    let anchor = AnchorSpec::new(AnchorPose::IDENTITY);
    let cfg = EpisodeConfig {
        settle_steps: 10,
        manipulation_steps: 3,
        ..EpisodeConfig::default()
    };
    let ep = Episode::settle(&mesh, &anchor, &cfg).unwrap();
    let r = ep.run(&mut HoldPolicy).unwrap();
    assert_eq!(r.manipulation_sim_steps, 24);
    assert_eq!(r.release_sim_steps, 500);
}

#[test]
fn no_manipulation_means_the_cloth_falls_and_fails() {
    let mesh = build_mesh(&ClothSpec::fixed()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let anchor = AnchorSpec::new(sample_anchor_pose(&mut rng, Regime::Ood));
    let cfg = EpisodeConfig {
        manipulation_steps: 0,
        ..fast_config()
    };
    let ep = Episode::settle(&mesh, &anchor, &cfg).unwrap();
    let z0 = geom::centroid(&ep.initial_cloud()).unwrap()[2];
    let r = ep.run(&mut HoldPolicy).unwrap();
    let z1 = geom::centroid(&r.post_release).unwrap()[2];
    assert!(z1 < z0 - 1.0);
    assert!(!r.success);
}

#[test]
fn hanger_never_moves() {
    let mesh = build_mesh(&ClothSpec::fixed()).unwrap();
    let anchor = AnchorSpec::new(AnchorPose {
        translation: [0.5, -1.0, 0.0],
        rotation_z: 0.2,
    });
    let before = anchor.capsules();
    let cfg = EpisodeConfig {
        settle_steps: 20,
        manipulation_steps: 20,
        release_steps: 20,
        ..EpisodeConfig::default()
    };
    let ep = Episode::settle(&mesh, &anchor, &cfg).unwrap();
    let mut pol = PseudoExpert::new(ep.state(), &anchor, &mesh.loops[0], &cfg.policy).unwrap();
    let sim_colliders = ep.sim.colliders.clone();
    ep.run(&mut pol).unwrap();
    assert_eq!(sim_colliders, before.to_vec());
    assert_eq!(anchor.capsules(), before);
}

fn settled_state() -> (ClothMesh, SimState) {
    let mesh = build_mesh(&ClothSpec::fixed()).unwrap();
    let anchor = AnchorSpec::new(AnchorPose::IDENTITY);
    let ep = Episode::settle(&mesh, &anchor, &fast_config()).unwrap();
    (mesh, ep.state().clone())
}

#[test]
fn expert_correction_vanishes_at_goal() {
    let (mesh, mut state) = settled_state();
    let anchor = AnchorSpec::new(AnchorPose::IDENTITY);
    let lp = &mesh.loops[0];
    let c = geom::centroid(&lp.iter().map(|&v| state.positions[v]).collect::<Vec<_>>()).unwrap();
    let shift = geom::sub(anchor.goal(), c);
    for p in state.positions.iter_mut() {
        *p = geom::add(*p, shift);
    }
    let pol = PseudoExpert::new(&state, &anchor, lp, &PolicyParams::default()).unwrap();
    assert!(geom::norm(pol.correction(&state)) < 1e-12);
}

#[test]
fn expert_targets_translate_with_goal_offset() {
    let (mesh, state) = settled_state();
    let lp = &mesh.loops[0];
    let c = geom::centroid(&lp.iter().map(|&v| state.positions[v]).collect::<Vec<_>>()).unwrap();
    // Place the anchor so that the goal sits exactly (0, -5, 0) from the
    // current loop centroid.
    let base = AnchorSpec::new(AnchorPose::IDENTITY).goal();
    let want_goal = geom::add(c, [0.0, -5.0, 0.0]);
    let anchor = AnchorSpec::new(AnchorPose {
        translation: geom::sub(want_goal, base),
        rotation_z: 0.0,
    });
    let pol = PseudoExpert::new(&state, &anchor, lp, &PolicyParams::default()).unwrap();
    for (g, t) in state.grippers.iter().zip(pol.final_targets()) {
        let d = geom::sub(*t, g.position);
        assert!(geom::dist(d, [0.0, -5.0, 0.0]) < 1e-9, "{d:?}");
    }
}

#[test]
fn two_hole_expert_uses_only_the_chosen_hole() {
    let mut spec = ClothSpec::fixed();
    spec.holes = vec![
        HoleSpec {
            x0: 3,
            y0: 8,
            x1: 9,
            y1: 13,
        },
        HoleSpec {
            x0: 14,
            y0: 8,
            x1: 20,
            y1: 13,
        },
    ];
    spec.num_holes = 2;
    let mesh = build_mesh(&spec).unwrap();
    let anchor = AnchorSpec::new(AnchorPose::IDENTITY);
    let ep = Episode::settle(&mesh, &anchor, &fast_config()).unwrap();
    let state = ep.state();
    let a = PseudoExpert::new(state, &anchor, &mesh.loops[0], &PolicyParams::default()).unwrap();
    let b = PseudoExpert::new(state, &anchor, &mesh.loops[1], &PolicyParams::default()).unwrap();
    // The two choices shift the cloth in opposite x directions.
    let dx = a.final_targets()[0][0] - b.final_targets()[0][0];
    assert!(dx > 0.2, "{dx}");
}

#[test]
fn evaluation_policy_contract() {
    let (mesh, state) = settled_state();
    let initial = state.positions.clone();
    let targets = evaluation_targets(&initial, &mesh.gripper_vertices).unwrap();
    for (g, t) in state.grippers.iter().zip(&targets) {
        assert_eq!(g.position, *t);
    }
    let mut pol = EvalPolicy::new(
        &state,
        &initial,
        &mesh.gripper_vertices,
        &PolicyParams::default(),
    )
    .unwrap();
    assert_eq!(pol.targets(&state), targets);
    assert!(evaluation_targets(&initial, &[0, initial.len()]).is_err());
    assert!(EvalPolicy::new(
        &state,
        &initial[1..],
        &mesh.gripper_vertices,
        &PolicyParams::default()
    )
    .is_err());
}

#[test]
fn ground_truth_goal_reproduces_expert_success() {
    let mesh = build_mesh(&ClothSpec::fixed()).unwrap();
    let cfg = EpisodeConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let anchor = AnchorSpec::new(sample_anchor_pose(&mut rng, Regime::Train));
    let ep = Episode::settle(&mesh, &anchor, &cfg).unwrap();
    let mut expert = PseudoExpert::new(ep.state(), &anchor, &mesh.loops[0], &cfg.policy).unwrap();
    let demo = ep.clone().run(&mut expert).unwrap();
    assert!(demo.success);
    let mut eval = EvalPolicy::new(
        ep.state(),
        &demo.pre_release,
        &mesh.gripper_vertices,
        &cfg.policy,
    )
    .unwrap();
    let replay = ep.run(&mut eval).unwrap();
    assert!(replay.success);
}

struct Offset {
    inner: PseudoExpert,
    shift: Vec3,
}

impl Policy for Offset {
    fn targets(&mut self, _state: &SimState) -> Vec<Vec3> {
        self.inner
            .final_targets()
            .iter()
            .map(|t| geom::add(*t, self.shift))
            .collect()
    }
}

#[test]
fn cloth_released_past_the_bar_tip_fails() {
    // Holding the hole just beyond the free end of the bar passes the loose
    // centroid check but must fail the polygon check.
    let mesh = build_mesh(&ClothSpec::fixed()).unwrap();
    let cfg = EpisodeConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let anchor = AnchorSpec::new(sample_anchor_pose(&mut rng, Regime::Train));
    let ep = Episode::settle(&mesh, &anchor, &cfg).unwrap();
    let inner = PseudoExpert::new(ep.state(), &anchor, &mesh.loops[0], &cfg.policy).unwrap();
    let shift = geom::scale(anchor.bar_direction(), 0.5);
    let r = ep.run(&mut Offset { inner, shift }).unwrap();
    assert!(r.holes[0].centroid);
    assert!(!r.holes[0].polygon);
    assert!(!r.success);
}

#[test]
fn released_state_has_no_pins() {
    let (_, mut state) = settled_state();
    assert_eq!(state.pinned().len(), 2);
    state.phase = Phase::Release;
    assert!(state.pinned().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pd_force_is_clamped_per_axis(
        pos in prop::array::uniform3(-20.0f64..20.0),
        vel in prop::array::uniform3(-20.0f64..20.0),
        tgt in prop::array::uniform3(-20.0f64..20.0),
    ) {
        let g = PdGains::default();
        let f = pd_control(&g, pos, vel, tgt);
        for k in 0..3 {
            prop_assert!(f[k].abs() <= 5.0);
            let raw = 50.0 * (tgt[k] - pos[k]) - 50.0 * vel[k];
            if raw.abs() <= 5.0 {
                prop_assert!((f[k] - raw).abs() < 1e-12);
            } else {
                prop_assert_eq!(f[k], 5.0 * raw.signum());
            }
        }
    }

    #[test]
    fn centroid_check_is_monotone(
        pts in prop::collection::vec(prop::array::uniform3(-3.0f64..3.0), 4..10),
        goal in prop::array::uniform3(-3.0f64..3.0),
        frac in 0.0f64..1.0,
    ) {
        // Pull every loop vertex toward the goal, which moves the centroid
        // strictly closer.
        let ids: Vec<usize> = (0..pts.len()).collect();
        let c = geom::centroid(&pts).unwrap();
        let shift = geom::scale(geom::sub(goal, c), frac);
        let moved: Vec<Vec3> = pts.iter().map(|p| geom::add(*p, shift)).collect();
        if centroid_check(&pts, &ids, goal, CENTROID_THRESHOLD) {
            prop_assert!(centroid_check(&moved, &ids, goal, CENTROID_THRESHOLD));
        }
    }
}
