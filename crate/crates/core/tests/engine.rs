mod common;

use ats_core::engine::write_diagnostics_csv;
use ats_core::{
    draw_perturbed_parameters, truncation_horizon, EngineConfig, ParameterPosterior, ParameterVector, StreamKey,
    ThompsonEngine,
};
use ats_core::stats::MeanSe;
use common::*;
use nalgebra::DMatrix;

fn sd_of_draws(count: u64, draws: usize, seed: u64) -> (f64, f64) {
    let post = ParameterPosterior::new(ParameterVector::zeros(1), DMatrix::from_element(1, 1, 1.0), count).unwrap();
    let mut rng = StreamKey::root(seed).rng();
    let xs: Vec<f64> = (0..draws).map(|_| draw_perturbed_parameters(&post, &mut rng)[0]).collect();
    let m = MeanSe::of(&xs);
    (m.sd(), m.se)
}

#[test]
fn unit_information_with_four_samples() {
    let (sd, _) = sd_of_draws(4, 100_000, 1);
    assert!((sd - 0.5).abs() < 0.005, "sd {sd}");
}

#[test]
fn draw_mean_is_centered() {
    let post = ParameterPosterior::new(
        ParameterVector::new(vec![1.0, -3.0]).unwrap(),
        DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
        4,
    )
    .unwrap();
    let mut rng = StreamKey::root(2).rng();
    let draws: Vec<ParameterVector> = (0..100_000).map(|_| draw_perturbed_parameters(&post, &mut rng)).collect();
    for j in 0..2 {
        let xs: Vec<f64> = draws.iter().map(|d| d[j]).collect();
        let m = MeanSe::of(&xs);
        assert!((m.mean - post.theta_hat()[j]).abs() < 3.0 * m.se);
    }
}

#[test]
fn dispersion_scales_with_inverse_root_count() {
    let (a, _) = sd_of_draws(10, 100_000, 3);
    let (b, _) = sd_of_draws(40, 100_000, 4);
    assert!((b / a - 0.5).abs() < 0.025, "ratio {}", b / a);
}

#[test]
fn schedule_is_monotone() {
    for gamma in [0.3, 0.5, 0.7, 0.9, 0.95, 0.99] {
        let mut prev = truncation_horizon(1, gamma).unwrap();
        for t in 2..=10_000 {
            let r = truncation_horizon(t, gamma).unwrap();
            assert!(r >= prev);
            prev = r;
        }
    }
}

fn quick_config(seed: u64) -> EngineConfig {
    EngineConfig {
        gamma: 0.5,
        rollouts_per_eval: 32,
        master_seed: seed,
        ..Default::default()
    }
}

#[test]
fn single_member_class_always_acts() {
    let m = Coin::new(0.5);
    let class = ArmClass(1);
    let mut engine = ThompsonEngine::new(&m, &class, quick_config(0), ParameterVector::new(vec![2.0]).unwrap()).unwrap();
    let mut truth_rng = StreamKey::root(99).rng();
    let truth = ParameterVector::new(vec![-1.0]).unwrap();
    let mut state = false;
    for _ in 0..20 {
        let (next, _, diag) = engine
            .ts_epoch(&state, |a| {
                assert_eq!(*a, 0);
                ats_core::DynamicsModel::sample_transition(&m, &state, a, &truth, &mut truth_rng)
            })
            .unwrap();
        assert_eq!(diag.policy_params, vec![0.0]);
        state = next;
    }
    assert_eq!(engine.history().len(), 20);
}

#[test]
fn known_better_arm_is_always_chosen() {
    // Without refits the planning parameter stays at the warm start: a
    // zero-width posterior on theta = 1, where arm 1 is worth 0.46 per step.
    let m = Coin::new(1.0);
    let class = ArmClass(2);
    let cfg = EngineConfig {
        min_fit_epochs: usize::MAX,
        ..quick_config(5)
    };
    let exact_arm1 = 2.0 * ats_core::decision::expit(1.0) - 1.0;
    assert!(exact_arm1 > 0.4);
    let mut engine = ThompsonEngine::new(&m, &class, cfg, ParameterVector::new(vec![1.0]).unwrap()).unwrap();
    let mut rng = StreamKey::root(6).rng();
    let truth = ParameterVector::new(vec![-2.0]).unwrap();
    let mut state = false;
    for _ in 0..50 {
        let (next, _, diag) = engine
            .ts_epoch(&state, |a| {
                assert_eq!(*a, 1);
                ats_core::DynamicsModel::sample_transition(&m, &state, a, &truth, &mut rng)
            })
            .unwrap();
        assert!(diag.update.warm_start);
        state = next;
    }
}

#[test]
fn uncertainty_explores_both_arms() {
    let m = Coin::new(1.0);
    let class = ArmClass(2);
    let cfg = EngineConfig {
        rollouts_per_eval: 8,
        ..quick_config(7)
    };
    let mut engine = ThompsonEngine::new(&m, &class, cfg, ParameterVector::zeros(1)).unwrap();
    let mut rng = StreamKey::root(8).rng();
    let truth = ParameterVector::zeros(1);
    let mut counts = [0usize; 2];
    let mut state = false;
    for _ in 0..500 {
        let (next, _, diag) = engine
            .ts_epoch(&state, |a| {
                counts[*a] += 1;
                ats_core::DynamicsModel::sample_transition(&m, &state, a, &truth, &mut rng)
            })
            .unwrap();
        assert!(diag.update.fit_error.is_none());
        state = next;
    }
    assert!(counts[0] > 0 && counts[1] > 0, "{counts:?}");
    assert!(engine.posterior().is_some());
}

fn run_engine(seed: u64) -> (Vec<usize>, Vec<u8>) {
    let m = TwoByTwo::new([[[-0.5, 0.5], [0.2, -0.1]], [[0.3, 0.8], [-0.6, 0.4]]]);
    let cfg = EngineConfig {
        rollouts_per_eval: 16,
        gamma: 0.8,
        ..quick_config(seed)
    };
    let mut engine = ThompsonEngine::new(&m, &RuleClass, cfg, ParameterVector::zeros(4)).unwrap();
    let truth = ParameterVector::new(vec![0.5, -0.5, 1.0, -1.0]).unwrap();
    let mut rng = StreamKey::root(seed).child(1).rng();
    let mut actions = Vec::new();
    let mut diags = Vec::new();
    let mut state = 0usize;
    for _ in 0..40 {
        let (next, _, diag) = engine
            .ts_epoch(&state, |a| {
                actions.push(*a);
                ats_core::DynamicsModel::sample_transition(&m, &state, a, &truth, &mut rng)
            })
            .unwrap();
        diags.push(diag);
        state = next;
    }
    let mut hist = Vec::new();
    engine
        .history()
        .write_csv(&mut hist, |s| s.to_string(), |a| a.to_string())
        .unwrap();
    let mut out = Vec::new();
    write_diagnostics_csv(&diags, &mut out).unwrap();
    hist.extend(out);
    (actions, hist)
}

#[test]
fn same_seed_same_run() {
    let a = run_engine(42);
    let b = run_engine(42);
    assert_eq!(a, b);
}

#[test]
fn diagnostics_have_one_row_per_epoch() {
    let (_, bytes) = run_engine(3);
    let text = String::from_utf8(bytes).unwrap();
    let diag = text.split("t,r_t,").nth(1).unwrap();
    assert!(diag.starts_with("policy_params,value_mean,value_se,refit,theta_tilde_0"));
    assert_eq!(diag.lines().count(), 41);
}

#[test]
fn rejects_bad_warm_start() {
    let m = Coin::new(1.0);
    assert!(ThompsonEngine::new(&m, &ArmClass(2), quick_config(0), ParameterVector::zeros(3)).is_err());
}
