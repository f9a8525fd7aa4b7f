use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xdisp_autodiff::{Graph, Tensor};
use xdisp_core::diffusion::{
    gaussian_kl, gaussian_nll, hybrid_loss, make_linear_schedule, model_mean, q_sample,
    reverse_step, sample_loop, standard_normal, LossTarget, NoiseSchedule, ScheduleConfig,
};
use xdisp_core::CoreError;

/// Running product over the same linear betas, computed from scratch.
fn oracle_alpha_bars(t_max: usize) -> Vec<f64> {
    let (b0, b1) = (0.1 / t_max as f64, (20.0 / t_max as f64).min(0.999));
    let mut out = vec![1.0];
    let mut prod = 1.0;
    for i in 0..t_max {
        let beta = if t_max == 1 {
            b0
        } else {
            b0 + (b1 - b0) * i as f64 / (t_max - 1) as f64
        };
        prod *= 1.0 - beta;
        out.push(prod);
    }
    out
}

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Tensor {
    standard_normal(rng, &[n, 3])
}

#[test]
fn alpha_bar_at_t100_is_pinned() {
    // Running product of (1 - beta) over 100 linear betas from 1e-3 to 0.2,
    // evaluated independently in double precision.
    let s = make_linear_schedule(100).unwrap();
    let pinned = 2.0390089755640772e-05;
    assert!((s.alpha_bar(100) - pinned).abs() <= 1e-12 * pinned);
}

#[test]
fn alpha_bars_match_running_product() {
    for t_max in [1, 2, 10, 100, 1000] {
        let s = make_linear_schedule(t_max).unwrap();
        let oracle = oracle_alpha_bars(t_max);
        for t in 0..=t_max {
            assert!(
                (s.alpha_bar(t) - oracle[t]).abs() < 1e-12,
                "T={t_max} t={t}"
            );
        }
    }
}

#[test]
fn schedule_invariants() {
    let s = make_linear_schedule(100).unwrap();
    assert!(s.alpha_bar(100) < 1e-3);
    assert_eq!(s.posterior_variance(1), 0.0);
    for t in 1..=100 {
        let b = s.beta(t);
        assert!(b > 0.0 && b < 1.0);
        assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
        let pv = s.posterior_variance(t);
        assert!((0.0..=b).contains(&pv), "t={t}");
        if t > 1 {
            assert!(b >= s.beta(t - 1));
        }
    }
}

#[test]
fn single_step_schedule_definition() {
    let s = make_linear_schedule(1).unwrap();
    assert_eq!(s.alpha_bar(1), 1.0 - s.beta(1));
}

#[test]
fn schedule_rejects_bad_configs() {
    assert!(matches!(make_linear_schedule(0), Err(CoreError::Config(_))));
    let bad = ScheduleConfig {
        steps: 10,
        beta_start: 0.5,
        beta_end: 0.1,
    };
    assert!(NoiseSchedule::new(bad).is_err());
}

#[test]
fn q_sample_at_zero_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = make_linear_schedule(100).unwrap();
    let x0 = cloud(&mut rng, 7);
    let eps = cloud(&mut rng, 7);
    assert_eq!(q_sample(&x0, 0, &eps, &s).unwrap(), x0);
}

#[test]
fn q_sample_of_zero_data_at_t_max_is_scaled_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = make_linear_schedule(100).unwrap();
    let eps = cloud(&mut rng, 5);
    let x = q_sample(&Tensor::zeros([5, 3]), 100, &eps, &s).unwrap();
    let k = (1.0 - s.alpha_bar(100)).sqrt();
    for (a, e) in x.data().iter().zip(eps.data()) {
        assert_eq!(*a, k * e);
        assert!((a - e).abs() < 1e-4 * e.abs().max(1.0));
    }
}

#[test]
fn q_sample_moments_match_monte_carlo() {
    let s = make_linear_schedule(100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 100_000;
    let x0 = 0.8;
    for t in [1, 30, 100] {
        let eps = standard_normal(&mut rng, &[n, 1]);
        let x = q_sample(&Tensor::full([n, 1], x0), t, &eps, &s).unwrap();
        let mean = x.data().iter().sum::<f64>() / n as f64;
        let var = x.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let want_mean = s.alpha_bar(t).sqrt() * x0;
        let want_var = 1.0 - s.alpha_bar(t);
        let se_mean = (want_var / n as f64).sqrt();
        let se_var = want_var * (2.0 / (n - 1) as f64).sqrt();
        assert!(
            (mean - want_mean).abs() < 3.0 * se_mean,
            "t={t} mean {mean}"
        );
        assert!((var - want_var).abs() < 3.0 * se_var, "t={t} var {var}");
    }
}

#[test]
fn q_sample_shape_mismatch() {
    let s = make_linear_schedule(10).unwrap();
    let r = q_sample(&Tensor::zeros([3, 3]), 1, &Tensor::zeros([4, 3]), &s);
    assert!(matches!(r, Err(CoreError::Shape { .. })));
}

#[test]
fn exact_noise_inverts_at_final_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = make_linear_schedule(100).unwrap();
    let x0 = cloud(&mut rng, 9);
    let eps = cloud(&mut rng, 9);
    let x1 = q_sample(&x0, 1, &eps, &s).unwrap();
    let v = Tensor::full([9, 3], 0.37);
    let noise = cloud(&mut rng, 9);
    let back = reverse_step(&x1, 1, &eps, &v, &s, &noise).unwrap();
    assert!(back.max_abs_diff(&x0) < 1e-10);
}

#[test]
fn variance_interpolation_endpoints() {
    let s = make_linear_schedule(100).unwrap();
    let t = 37;
    let xt = Tensor::full([1, 3], 0.3);
    let eps = Tensor::full([1, 3], -0.2);
    let noise = Tensor::full([1, 3], 1.0);
    let mean = model_mean(&xt, t, &eps, &s).unwrap();
    for (v, want) in [(1.0, s.beta(t)), (0.0, s.posterior_variance(t))] {
        let out = reverse_step(&xt, t, &eps, &Tensor::full([1, 3], v), &s, &noise).unwrap();
        for (o, m) in out.data().iter().zip(mean.data()) {
            let sigma2 = (o - m).powi(2);
            assert!((sigma2 - want).abs() < 1e-14, "v={v}: {sigma2} vs {want}");
        }
    }
}

#[test]
fn reverse_step_rejects_bad_inputs() {
    let s = make_linear_schedule(10).unwrap();
    let z = Tensor::zeros([2, 3]);
    assert!(matches!(
        reverse_step(&z, 0, &z, &z, &s, &z),
        Err(CoreError::Timestep { .. })
    ));
    assert!(matches!(
        reverse_step(&z, 11, &z, &z, &s, &z),
        Err(CoreError::Timestep { .. })
    ));
    assert!(reverse_step(&z, 3, &z, &Tensor::full([2, 3], 1.5), &s, &z).is_err());
}

#[test]
fn closed_form_kl_matches_hand_derivation() {
    // KL(N(m1, s1^2) || N(m2, s2^2)) = ln(s2/s1) + (s1^2 + (m1-m2)^2)/(2 s2^2) - 1/2
    let (m1, s1, m2, s2) = (0.3_f64, 0.7_f64, -0.4_f64, 1.3_f64);
    let want = (s2 / s1).ln() + (s1 * s1 + (m1 - m2).powi(2)) / (2.0 * s2 * s2) - 0.5;
    let got = gaussian_kl(m1, (s1 * s1).ln(), m2, (s2 * s2).ln());
    assert!((got - want).abs() < 1e-14);
}

/// Builds the one-point, one-dimensional loss and returns (simple, vlb).
fn scalar_case(
    t: usize,
    x0: f64,
    eps: f64,
    eps_pred: f64,
    v_raw: f64,
    lambda: f64,
) -> (f64, f64, f64) {
    let s = make_linear_schedule(100).unwrap();
    let x0t = Tensor::full([1, 1], x0);
    let epst = Tensor::full([1, 1], eps);
    let xt = q_sample(&x0t, t, &epst, &s).unwrap();
    let g = Graph::new();
    let e = g.param(Tensor::full([1, 1], eps_pred));
    let v = g.param(Tensor::full([1, 1], v_raw)).sigmoid();
    let target = LossTarget {
        x0: &x0t,
        xt: &xt,
        eps: &epst,
        t,
    };
    let terms = hybrid_loss(e, v, &target, &s, lambda).unwrap();
    (
        terms.simple.value().item(),
        terms.vlb.value().item(),
        terms.total.value().item(),
    )
}

#[test]
fn vlb_matches_hand_computed_gaussian_kl() {
    let s = make_linear_schedule(100).unwrap();
    let (t, x0, eps, eps_pred, v_raw) = (23, 0.6, -1.1, -0.7, 0.4);
    let (_, vlb, _) = scalar_case(t, x0, eps, eps_pred, v_raw, 0.001);

    // Everything below from the schedule definitions directly.
    let ab = s.alpha_bar(t);
    let ab_prev = s.alpha_bar(t - 1);
    let beta = 1.0 - ab / ab_prev;
    let xt = ab.sqrt() * x0 + (1.0 - ab).sqrt() * eps;
    let mu_q =
        (ab_prev.sqrt() * beta * x0 + (1.0 - beta).sqrt() * (1.0 - ab_prev) * xt) / (1.0 - ab);
    let var_q = beta * (1.0 - ab_prev) / (1.0 - ab);
    let mu_p = (xt - beta / (1.0 - ab).sqrt() * eps_pred) / (1.0 - beta).sqrt();
    let v = 1.0 / (1.0 + (-v_raw).exp());
    let var_p = beta.powf(v) * var_q.powf(1.0 - v);
    let (s1, s2) = (var_q.sqrt(), var_p.sqrt());
    let want = (s2 / s1).ln() + (var_q + (mu_q - mu_p).powi(2)) / (2.0 * var_p) - 0.5;
    assert!((vlb - want).abs() < 1e-10, "{vlb} vs {want}");
}

#[test]
fn final_step_term_is_gaussian_nll() {
    let s = make_linear_schedule(100).unwrap();
    let (x0, eps, eps_pred, v_raw) = (0.25, 0.9, 0.5, -0.3);
    let (_, vlb, _) = scalar_case(1, x0, eps, eps_pred, v_raw, 0.001);
    let ab = s.alpha_bar(1);
    let xt = ab.sqrt() * x0 + (1.0 - ab).sqrt() * eps;
    let mu = (xt - s.beta(1) / (1.0 - ab).sqrt() * eps_pred) / s.alpha(1).sqrt();
    let v = 1.0 / (1.0 + (-v_raw).exp());
    let lv = v * s.beta(1).ln() + (1.0 - v) * s.posterior_variance(2).ln();
    let want = gaussian_nll(x0, mu, lv);
    assert!((vlb - want).abs() < 1e-10);
}

#[test]
fn matched_distributions_give_zero_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let s = make_linear_schedule(100).unwrap();
    for t in [2, 10, 99, 100] {
        let x0 = cloud(&mut rng, 6);
        let eps = cloud(&mut rng, 6);
        let xt = q_sample(&x0, t, &eps, &s).unwrap();
        let g = Graph::new();
        let e = g.param(eps.clone());
        // v = 0 selects the true posterior variance.
        let v = g.constant(Tensor::zeros([6, 3]));
        let target = LossTarget {
            x0: &x0,
            xt: &xt,
            eps: &eps,
            t,
        };
        let terms = hybrid_loss(e, v, &target, &s, 0.001).unwrap();
        assert_eq!(terms.simple.value().item(), 0.0);
        assert!(terms.vlb.value().item().abs() < 1e-10, "t={t}");
    }
}

#[test]
fn zero_lambda_is_plain_noise_mse() {
    let (simple, _, total) = scalar_case(40, 0.2, 0.3, -0.5, 1.0, 0.0);
    assert_eq!(total, simple);
    assert_eq!(simple, (0.3_f64 - -0.5_f64).powi(2));
}

#[test]
fn vlb_does_not_train_the_noise_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = make_linear_schedule(100).unwrap();
    let x0 = cloud(&mut rng, 4);
    let eps = cloud(&mut rng, 4);
    let xt = q_sample(&x0, 17, &eps, &s).unwrap();
    let g = Graph::new();
    let e = g.param(cloud(&mut rng, 4));
    let v = g.param(cloud(&mut rng, 4)).sigmoid();
    let target = LossTarget {
        x0: &x0,
        xt: &xt,
        eps: &eps,
        t: 17,
    };
    let terms = hybrid_loss(e, v, &target, &s, 0.001).unwrap();
    let grads = g.backward(terms.vlb).unwrap();
    assert!(grads.get(&e).is_none());
}

#[test]
fn hybrid_loss_is_non_negative_when_noise_term_dominates() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let s = make_linear_schedule(100).unwrap();
    for t in 2..=100 {
        let x0 = cloud(&mut rng, 3);
        let eps = cloud(&mut rng, 3);
        let xt = q_sample(&x0, t, &eps, &s).unwrap();
        let g = Graph::new();
        let e = g.param(cloud(&mut rng, 3));
        let v = g.param(cloud(&mut rng, 3)).sigmoid();
        let target = LossTarget {
            x0: &x0,
            xt: &xt,
            eps: &eps,
            t,
        };
        let terms = hybrid_loss(e, v, &target, &s, 0.001).unwrap();
        assert!(terms.simple.value().item() >= 0.0);
        assert!(terms.vlb.value().item() >= -1e-12, "KL is non-negative");
        assert!(terms.total.value().item() >= 0.0);
    }
}

#[test]
fn hybrid_loss_rejects_bad_timestep_and_shapes() {
    let s = make_linear_schedule(10).unwrap();
    let z = Tensor::zeros([2, 3]);
    let g = Graph::new();
    let e = g.param(z.clone());
    let v = g.param(z.clone());
    for t in [0, 11] {
        let target = LossTarget {
            x0: &z,
            xt: &z,
            eps: &z,
            t,
        };
        assert!(hybrid_loss(e, v, &target, &s, 0.001).is_err());
    }
    let other = Tensor::zeros([3, 3]);
    let target = LossTarget {
        x0: &other,
        xt: &other,
        eps: &other,
        t: 2,
    };
    assert!(matches!(
        hybrid_loss(e, v, &target, &s, 0.001),
        Err(CoreError::Shape { .. })
    ));
}

#[test]
fn sampling_runs_every_step_once_and_final_step_is_noise_free() {
    let s = make_linear_schedule(25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x_t = cloud(&mut rng, 4);
    let mut seen = Vec::new();
    let mut last_input = None;
    let out = sample_loop(&s, x_t, &mut rng, |x, t| {
        seen.push(t);
        if t == 1 {
            last_input = Some(x.clone());
        }
        Ok((Tensor::full([4, 3], 0.1), Tensor::full([4, 3], 0.5)))
    })
    .unwrap();
    assert_eq!(seen, (1..=25).rev().collect::<Vec<_>>());
    let want = model_mean(&last_input.unwrap(), 1, &Tensor::full([4, 3], 0.1), &s).unwrap();
    assert_eq!(out, want);
}
