mod common;

use ats_core::{estimate_value, optimize_policy, ParameterVector, SearchConfig, StreamKey};
use common::*;
use rand::Rng;

#[test]
fn geometric_sum_on_deterministic_chain() {
    let m = ConstantChain::new(vec![1.0]);
    let theta = ParameterVector::zeros(1);
    let v = estimate_value(&m, &theta, &Fixed(0), 3, &(), 16, 0.5, StreamKey::root(1)).unwrap();
    assert_eq!(v.mean, 1.75);
    assert_eq!(v.standard_error, 0.0);
    assert_eq!((v.rollouts, v.horizon), (16, 3));
}

#[test]
fn single_step_returns_the_utility() {
    let m = ConstantChain::new(vec![-0.3]);
    let v = estimate_value(&m, &ParameterVector::zeros(1), &Fixed(0), 1, &(), 4, 0.9, StreamKey::root(2)).unwrap();
    assert_eq!(v.mean, -0.3);
}

#[test]
fn zero_discount_is_first_step_utility() {
    let m = ConstantChain::new(vec![0.6]);
    let v = estimate_value(&m, &ParameterVector::zeros(1), &Fixed(0), 7, &(), 3, 0.0, StreamKey::root(3)).unwrap();
    assert_eq!(v.mean, 0.6);
}

#[test]
fn rejects_empty_budgets() {
    let m = ConstantChain::new(vec![0.0]);
    let th = ParameterVector::zeros(1);
    assert!(estimate_value(&m, &th, &Fixed(0), 0, &(), 3, 0.5, StreamKey::root(0)).is_err());
    assert!(estimate_value(&m, &th, &Fixed(0), 3, &(), 0, 0.5, StreamKey::root(0)).is_err());
}

#[test]
fn monte_carlo_matches_enumeration() {
    let mut rng = StreamKey::root(11).rng();
    let m = TwoByTwo::new(random_table(&mut rng));
    let th: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
    let theta = ParameterVector::new(th.clone()).unwrap();
    let rule = [1, 0];
    let exact = m.exact_value(&th, rule, 0, 4, 0.9);
    let v = estimate_value(&m, &theta, &Rule(rule), 4, &0, 20_000, 0.9, StreamKey::root(12)).unwrap();
    assert!((v.mean - exact).abs() < 3.0 * v.standard_error, "{} vs {exact}", v.mean);
}

#[test]
fn value_respects_bound() {
    let mut rng = StreamKey::root(21).rng();
    for k in 0..20 {
        let m = TwoByTwo::new(random_table(&mut rng));
        let th: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let gamma = rng.random_range(0.0..1.0);
        let horizon = rng.random_range(1..8);
        let v = estimate_value(&m, &ParameterVector::new(th).unwrap(), &Rule([0, 1]), horizon, &1, 50, gamma, StreamKey::root(k))
            .unwrap();
        let bound = (1.0 - gamma.powi(horizon as i32)) / (1.0 - gamma);
        assert!(v.mean.abs() <= bound + 1e-12);
        assert!(v.standard_error >= 0.0);
    }
}

#[test]
fn standard_error_halves_with_four_times_the_rollouts() {
    let m = TwoByTwo::new([[[-1.0, 1.0], [0.5, -0.5]], [[0.2, 0.9], [-0.7, 0.1]]]);
    let theta = ParameterVector::new(vec![0.3, -0.2, 0.5, 0.1]).unwrap();
    let mut ratio = 0.0;
    for k in 0..20 {
        let key = StreamKey::root(100 + k);
        let small = estimate_value(&m, &theta, &Rule([0, 1]), 5, &0, 200, 0.9, key.child(0)).unwrap();
        let large = estimate_value(&m, &theta, &Rule([0, 1]), 5, &0, 800, 0.9, key.child(1)).unwrap();
        ratio += large.standard_error / small.standard_error / 20.0;
    }
    assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn parallel_evaluation_is_reproducible() {
    let m = TwoByTwo::new([[[-1.0, 1.0], [0.5, -0.5]], [[0.2, 0.9], [-0.7, 0.1]]]);
    let theta = ParameterVector::new(vec![0.3, -0.2, 0.5, 0.1]).unwrap();
    let a = estimate_value(&m, &theta, &Rule([1, 1]), 6, &0, 300, 0.8, StreamKey::root(5)).unwrap();
    let b = estimate_value(&m, &theta, &Rule([1, 1]), 6, &0, 300, 0.8, StreamKey::root(5)).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
}

#[test]
fn finite_search_picks_the_better_policy() {
    let m = ConstantChain::new(vec![1.0, 0.0]);
    let cfg = SearchConfig {
        rollouts: 4,
        ..Default::default()
    };
    let c = optimize_policy(&m, &ParameterVector::zeros(1), &ArmClass(2), 3, &(), 0.5, &cfg, StreamKey::root(0)).unwrap();
    assert_eq!(c.params, vec![0.0]);
    assert_eq!(c.value.mean, 1.75);
}

#[test]
fn single_member_class() {
    let m = ConstantChain::new(vec![-0.2]);
    let c = optimize_policy(&m, &ParameterVector::zeros(1), &ArmClass(1), 2, &(), 0.5, &SearchConfig::default(), StreamKey::root(0))
        .unwrap();
    assert_eq!(c.params, vec![0.0]);
}

#[test]
fn finite_ties_go_to_lowest_index() {
    let m = ConstantChain::new(vec![0.3, 0.5, 0.5]);
    let c = optimize_policy(&m, &ParameterVector::zeros(1), &ArmClass(3), 2, &(), 0.5, &SearchConfig::default(), StreamKey::root(0))
        .unwrap();
    assert_eq!(c.params, vec![1.0]);
}

#[test]
fn argmax_ignores_constant_utility_shift() {
    let mut rng = StreamKey::root(31).rng();
    let cfg = SearchConfig {
        rollouts: 2000,
        ..Default::default()
    };
    for k in 0..10 {
        let mut table = random_table(&mut rng);
        for v in table.iter_mut().flatten().flatten() {
            *v *= 0.5;
        }
        let m = TwoByTwo::new(table);
        let shifted = m.shifted(0.4);
        let th = ParameterVector::new((0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let a = optimize_policy(&m, &th, &RuleClass, 3, &0, 0.9, &cfg, StreamKey::root(k)).unwrap();
        let b = optimize_policy(&shifted, &th, &RuleClass, 3, &0, 0.9, &cfg, StreamKey::root(k)).unwrap();
        assert_eq!(a.params, b.params);
        let gap = b.value.mean - a.value.mean;
        assert!((gap - 0.4 * (1.0 + 0.9 + 0.81)).abs() < 1e-9);
    }
}
