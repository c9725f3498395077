//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Numeric arguments select a subset, e.g.
//! `cargo test -p ats-harness --test acceptance -- 3 5`.

use std::process::ExitCode;
use std::time::Instant;

use ats_core::stats::{median, MeanSe};
use ats_core::{
    draw_perturbed_parameters, estimate_value, fit_mle, truncation_horizon, DynamicsModel, FitOptions, History,
    ParameterPosterior, ParameterVector, Policy, StreamKey,
};
use ats_envs::flu::{
    select_top, FluConfig, FluModel, FluParameters, FluState, PopulationConfig, PriorityPolicy, INFECTED,
    RECOVERED, SUSCEPTIBLE,
};
use ats_envs::mallard::{MallardConfig, MallardModel, MallardState, Practice, SurvivalTable};
use ats_envs::network::NetworkKind;
use ats_envs::synthetic::{StateRule, StateRuleClass, TwoStateChain};
use ats_harness::report::paired_t_test;
use ats_harness::{
    run_flu, run_mallard, run_regret_curve, FluExperiment, FluStrategy, MallardExperiment, MallardStrategy,
    RegretExperiment,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Self::new(false, format!("error: {e}"))
    }
}

fn strategy_ordering() -> Outcome {
    let exp = FluExperiment::default();
    let res = match run_flu(&exp) {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    if !res.failures.is_empty() {
        return Outcome::new(false, format!("{} replicate(s) failed", res.failures.len()));
    }
    let mut pass = true;
    let mut cells = Vec::new();
    for &network in &exp.networks {
        for &day in &exp.report_days {
            let none = res.series(network, FluStrategy::NoTreatment, day);
            let myopic = res.series(network, FluStrategy::Myopic, day);
            let ts = res.series(network, FluStrategy::Thompson, day);
            let (mn, mm, mt) = (MeanSe::of(&none).mean, MeanSe::of(&myopic).mean, MeanSe::of(&ts).mean);
            let (Ok(ts_vs_m), Ok(m_vs_none)) = (paired_t_test(&ts, &myopic), paired_t_test(&myopic, &none)) else {
                return Outcome::new(false, "paired test needs at least two replicates");
            };
            let gap = (mn - mt) / mn - (mn - mm) / mn;
            let ok = mt < mm && mm < mn && ts_vs_m.p_less < 0.01 && m_vs_none.p_less < 0.01 && gap >= 0.10;
            pass &= ok;
            cells.push(format!(
                "{}/T{day}: {mt:.3} < {mm:.3} < {mn:.3}, p = {:.1e}, {:.1e}, reduction gap {:.1}pp",
                network.label(),
                ts_vs_m.p_less,
                m_vs_none.p_less,
                100.0 * gap
            ));
        }
    }
    Outcome::new(pass, cells.join("; "))
}

fn mallard_comparison() -> Outcome {
    let exp = MallardExperiment::default();
    let res = match run_mallard(&exp) {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    if !res.failures.is_empty() {
        return Outcome::new(false, format!("{} replicate(s) failed", res.failures.len()));
    }
    let mut pass = true;
    let mut cells = Vec::new();
    for &size in &exp.initial_sizes {
        let m = |s| res.mean(size, s);
        let (l, md, r) = (m(MallardStrategy::Liberal), m(MallardStrategy::Moderate), m(MallardStrategy::Restricted));
        let (adp, ts) = (m(MallardStrategy::ApproximateDp), m(MallardStrategy::Thompson));
        let ok = l > md && md > r && (ts - adp).abs() <= 0.05 * adp && ts >= 0.98 * l;
        pass &= ok;
        cells.push(format!("{size}: L {l:.2} > M {md:.2} > R {r:.2}, TS {ts:.2} vs ADP {adp:.2}"));
    }
    Outcome::new(pass, cells.join("; "))
}

fn regret_rate() -> Outcome {
    let curve = match run_regret_curve(&RegretExperiment::default()) {
        Ok(c) => c,
        Err(e) => return Outcome::error(e),
    };
    if !curve.failures.is_empty() {
        return Outcome::new(false, format!("{} seed(s) failed", curve.failures.len()));
    }
    let medians: Vec<f64> = curve.points.iter().map(|p| p.median).collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let in_band = curve.slope.is_some_and(|s| (-0.8..=-0.3).contains(&s));
    let shown: Vec<String> = medians.iter().map(|m| format!("{m:.4}")).collect();
    Outcome::new(
        decreasing && in_band,
        format!("slope {:?}, medians [{}]", curve.slope.map(|s| (s * 1e4).round() / 1e4), shown.join(", ")),
    )
}

/// Largest `r >= 1` with `gamma^(2r) >= 1 / t`, or 1.
fn direct_horizon(t: u64, gamma: f64) -> usize {
    if gamma == 0.5 {
        // Exact in integers: 4^r <= t.
        let mut r = 0usize;
        while 4u64.checked_pow(r as u32 + 1).is_some_and(|p| p <= t) {
            r += 1;
        }
        return r.max(1);
    }
    ((-(t as f64).ln() / (gamma * gamma).ln()).floor() as usize).max(1)
}

fn truncation_exactness() -> Outcome {
    let mut mismatches = 0;
    let mut first = None;
    for gamma in [0.5, 0.9, 0.95] {
        for t in 1..=10_000u64 {
            let got = truncation_horizon(t, gamma).ok();
            let want = direct_horizon(t, gamma);
            if got != Some(want) {
                mismatches += 1;
                first.get_or_insert((t, gamma, got, want));
            }
        }
    }
    Outcome::new(mismatches == 0, format!("{mismatches} mismatches over 30000 pairs; first {first:?}"))
}

fn sampler_moments() -> Outcome {
    let q = 3;
    let mut rng = StreamKey::root(11).rng();
    let a = DMatrix::from_fn(q, q, |_, _| rng.random::<f64>());
    let omega = &a * a.transpose() + DMatrix::identity(q, q) * 0.1;
    let theta_hat = ParameterVector::new((0..q).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).unwrap();
    let posterior = match ParameterPosterior::new(theta_hat.clone(), omega.clone(), 4) {
        Ok(p) => p,
        Err(e) => return Outcome::error(e),
    };
    let n = 100_000;
    let mut draw_rng = StreamKey::root(12).rng();
    let draws: Vec<Vec<f64>> = (0..n)
        .map(|_| draw_perturbed_parameters(&posterior, &mut draw_rng).as_slice().to_vec())
        .collect();
    let target = &omega / 4.0;
    let mean: Vec<f64> = (0..q).map(|i| draws.iter().map(|d| d[i]).sum::<f64>() / n as f64).collect();
    let mut worst_z: f64 = 0.0;
    for i in 0..q {
        let se = (target[(i, i)] / n as f64).sqrt();
        worst_z = worst_z.max(((mean[i] - theta_hat[i]) / se).abs());
    }
    let mut worst_rel: f64 = 0.0;
    for i in 0..q {
        for j in 0..q {
            let c = draws.iter().map(|d| (d[i] - mean[i]) * (d[j] - mean[j])).sum::<f64>() / (n - 1) as f64;
            worst_rel = worst_rel.max(((c - target[(i, j)]) / target[(i, j)]).abs());
        }
    }
    Outcome::new(
        worst_z <= 3.0 && worst_rel <= 0.03,
        format!("max |z| of mean {worst_z:.2}, max relative covariance error {:.2}%", 100.0 * worst_rel),
    )
}

fn value_oracle() -> Outcome {
    let mut rng = StreamKey::root(13).rng();
    let (horizon, gamma, n) = (4, 0.9, 100_000);
    let mut pass = true;
    let mut zs = Vec::new();
    for k in 0..5u64 {
        let chain = TwoStateChain::random(&mut rng);
        let theta: Vec<f64> = (0..4).map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let rule = StateRuleClass::rule(rng.random_range(0..4));
        let start = rng.random_range(0..2usize);
        let exact = chain.exact_value(&theta, rule, start, horizon, gamma);
        let tv = ParameterVector::new(theta).unwrap();
        let key = StreamKey::root(14).child(k);
        let est = match estimate_value(&chain, &tv, &StateRule(rule), horizon, &start, n, gamma, key) {
            Ok(v) => v,
            Err(e) => return Outcome::error(e),
        };
        let z = (est.mean - exact) / est.standard_error;
        pass &= z.abs() <= 3.0;
        zs.push(format!("{z:+.2}"));
    }
    Outcome::new(pass, format!("z-scores [{}]", zs.join(", ")))
}

/// Ordinary least squares of `y` on `(1, x)` via the normal equations.
fn ols(x: &[f64], y: &[f64]) -> [f64; 2] {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    [(sxx * sy - sx * sxy) / det, (n * sxy - sx * sy) / det]
}

fn flu_estimation_error(stream: u64, cfg: &FluConfig, model: &FluModel, truth: &ParameterVector) -> Option<(f64, f64)> {
    let key = StreamKey::root(15).child(stream);
    let mut state = cfg.world(&mut key.child(0).rng()).ok()?;
    let params = model.params(truth);
    let mut rng = key.child(1).rng();
    let mut history: History<FluState, Vec<u8>> = History::new();
    let opts = FitOptions {
        ridge: 0.0,
        ..FitOptions::default()
    };
    let mut errors = Vec::new();
    for day in 1..=60 {
        let scores: Vec<f64> = (0..state.len()).map(|_| rng.random()).collect();
        let action = select_top(&scores, cfg.budget(), &mut rng);
        let (next, u) = model.step(&state, &action, &params, &mut rng).ok()?;
        history.append(state, action, u).ok()?;
        state = next;
        if day == 15 || day == 60 {
            let fit = fit_mle(model, &history.transitions_to(&state), truth, &opts).ok()?;
            let d: f64 = fit
                .theta_hat
                .as_slice()
                .iter()
                .zip(truth.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            errors.push(d.sqrt());
        }
    }
    Some((errors[0], errors[1]))
}

fn mle_consistency() -> Outcome {
    // Pond regression.
    let model = MallardModel::new(SurvivalTable::default()).unwrap();
    let beta = MallardConfig::default().beta;
    let mut rng = StreamKey::root(16).rng();
    let mut state = MallardConfig::default().initial_state();
    let mut history = History::new();
    let mut ponds = vec![state.ponds];
    for y in 0..200 {
        let a = Practice::ALL[y % 4];
        let (next, u) = model.step(&state, a, beta, &mut rng);
        history.append(state, a, u).unwrap();
        ponds.push(next.ponds);
        state = next;
    }
    let opts = FitOptions {
        ridge: 0.0,
        grad_tol: 1e-12,
        ..FitOptions::default()
    };
    let fit = match fit_mle(&model, &history.transitions_to(&state), &ParameterVector::zeros(2), &opts) {
        Ok(f) => f,
        Err(e) => return Outcome::error(e),
    };
    let reference = ols(&ponds[..200], &ponds[1..]);
    let pond_gap = fit
        .theta_hat
        .as_slice()
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let uncensored = ponds.iter().all(|p| *p > 0.0);

    // Epidemic estimator under a random 20% treatment policy.
    let cfg = FluConfig {
        population: PopulationConfig {
            size: 500,
            ..PopulationConfig::default()
        },
        ..FluConfig::default()
    };
    let flu = cfg.model().unwrap();
    let truth = cfg.theta.theta().unwrap();
    let mut early = Vec::new();
    let mut late = Vec::new();
    let mut failed = 0;
    for stream in 0..20 {
        match flu_estimation_error(stream, &cfg, &flu, &truth) {
            Some((e, l)) => {
                early.push(e);
                late.push(l);
            }
            None => failed += 1,
        }
    }
    let (m15, m60) = (median(&early), median(&late));
    Outcome::new(
        pond_gap < 1e-6 && uncensored && failed == 0 && m60 < m15,
        format!(
            "pond fit vs least squares {pond_gap:.1e}; flu median error t=15 {m15:.3}, t=60 {m60:.3} ({failed} failed fits)"
        ),
    )
}

fn flu_world(size: usize, kind: NetworkKind, infected: f64, seed: u64) -> FluState {
    let cfg = FluConfig {
        population: PopulationConfig {
            size,
            network: kind,
            agents_per_school: 6,
            agents_per_employer: 4,
            ..PopulationConfig::default()
        },
        initial_infected_fraction: infected,
        ..FluConfig::default()
    };
    cfg.world(&mut StreamKey::root(seed).rng()).unwrap()
}

fn network() -> impl Strategy<Value = NetworkKind> {
    prop_oneof![
        Just(NetworkKind::BarabasiAlbert),
        Just(NetworkKind::ErdosRenyi),
        Just(NetworkKind::WattsStrogatz)
    ]
}

fn mallard_state() -> impl Strategy<Value = MallardState> {
    (0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0, 0.0f64..8.0).prop_map(|(am, af, ym, yf, ponds)| {
        MallardState {
            adult_male: am,
            adult_female: af,
            young_male: ym,
            young_female: yf,
            ponds,
            year: 0,
        }
    })
}

fn invariants() -> Outcome {
    let cases = 1000;
    let runner = || TestRunner::new_with_rng(Config::with_cases(cases), TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let flu = FluModel::new(FluParameters::truth(), 0.25).unwrap();
    let mallard = MallardModel::new(SurvivalTable::default()).unwrap();
    let beta = MallardConfig::default().beta;
    let mut results: Vec<(&str, Result<(), String>)> = Vec::new();

    let conservation = runner().run(
        &(5usize..30, network(), 0.0f64..0.6, 1usize..5, any::<u64>()),
        |(size, kind, infected, days, seed)| {
            let params = FluParameters::truth();
            let mut st = flu_world(size, kind, infected, seed);
            let mut rng = StreamKey::root(seed).child(1).rng();
            for _ in 0..days {
                let action = vec![0u8; size];
                let (next, _) = flu.step(&st, &action, &params, &mut rng).unwrap();
                prop_assert_eq!(next.count(SUSCEPTIBLE) + next.count(INFECTED) + next.count(RECOVERED), size);
                for (a, b) in st.status.iter().zip(&next.status) {
                    prop_assert!(b >= a && b - a <= 1);
                }
                st = next;
            }
            Ok(())
        },
    );
    results.push(("conservation", conservation.map_err(|e| e.to_string())));

    let budget = runner().run(
        &(3usize..30, network(), 0.0f64..0.6, 0.0f64..1.0, prop::array::uniform5(-2.0f64..2.0), any::<u64>()),
        |(size, kind, infected, share, eta, seed)| {
            let st = flu_world(size, kind, infected, seed);
            let m = (share * size as f64) as usize;
            let policy = PriorityPolicy {
                eta,
                budget: m,
                params: FluParameters::truth(),
            };
            let a = policy.act(&st, &mut StreamKey::root(seed).rng());
            prop_assert_eq!(a.iter().map(|&x| x as usize).sum::<usize>(), m.min(size));
            Ok(())
        },
    );
    results.push(("budget", budget.map_err(|e| e.to_string())));

    let nonnegativity = runner().run(&(mallard_state(), 0usize..4, any::<u64>()), |(st, a, seed)| {
        let (next, u) = mallard.step(&st, Practice::ALL[a], beta, &mut StreamKey::root(seed).rng());
        prop_assert!(next.classes().iter().all(|c| *c >= 0.0));
        prop_assert!(next.ponds >= 0.0);
        prop_assert!((0.0..=1.0).contains(&u));
        Ok(())
    });
    results.push(("nonnegativity", nonnegativity.map_err(|e| e.to_string())));

    let determinism = runner().run(
        &(5usize..25, network(), 0.0f64..0.6, mallard_state(), any::<u64>()),
        |(size, kind, infected, ms, seed)| {
            let st = flu_world(size, kind, infected, seed);
            prop_assert_eq!(&st.status, &flu_world(size, kind, infected, seed).status);
            let key = StreamKey::root(seed).child(7);
            let action = vec![0u8; size];
            let params = FluParameters::truth();
            let (a, ua) = flu.step(&st, &action, &params, &mut key.rng()).unwrap();
            let (b, ub) = flu.step(&st, &action, &params, &mut key.rng()).unwrap();
            prop_assert_eq!(&a.status, &b.status);
            prop_assert_eq!(ua.to_bits(), ub.to_bits());
            let (x, _) = mallard.step(&ms, Practice::Liberal, beta, &mut key.rng());
            let (y, _) = mallard.step(&ms, Practice::Liberal, beta, &mut key.rng());
            prop_assert_eq!(x.classes().map(f64::to_bits), y.classes().map(f64::to_bits));
            prop_assert_eq!(x.ponds.to_bits(), y.ponds.to_bits());
            Ok(())
        },
    );
    results.push(("determinism", determinism.map_err(|e| e.to_string())));

    let finiteness = runner().run(
        &(5usize..25, network(), 0.0f64..0.6, mallard_state(), 0usize..4, any::<u64>()),
        |(size, kind, infected, ms, a, seed)| {
            let st = flu_world(size, kind, infected, seed);
            let mut rng = StreamKey::root(seed).child(3).rng();
            let scores: Vec<f64> = (0..size).map(|_| rng.random()).collect();
            let action = select_top(&scores, size / 5, &mut rng);
            let params = FluParameters::truth();
            let (next, _) = flu.step(&st, &action, &params, &mut rng).unwrap();
            prop_assert!(flu.transition_log_density(&next, &st, &action, &params).is_finite());
            let theta = ParameterVector::new(beta.to_vec()).unwrap();
            let (mn, _) = mallard.step(&ms, Practice::ALL[a], beta, &mut rng);
            prop_assert!(mallard.log_density(&mn, &ms, &Practice::ALL[a], &theta).is_finite());
            Ok(())
        },
    );
    results.push(("likelihood finiteness", finiteness.map_err(|e| e.to_string())));

    let failed: Vec<String> = results
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    let names: Vec<&str> = results.iter().map(|(n, _)| *n).collect();
    if failed.is_empty() {
        Outcome::new(true, format!("{} properties x {cases} cases: {}", names.len(), names.join(", ")))
    } else {
        Outcome::new(false, failed.join("; "))
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("strategy ordering on the epidemic", strategy_ordering),
        ("harvest strategy comparison", mallard_comparison),
        ("regret rate", regret_rate),
        ("truncation schedule", truncation_exactness),
        ("perturbation sampler moments", sampler_moments),
        ("Monte Carlo value oracle", value_oracle),
        ("estimator consistency", mle_consistency),
        ("invariant suite", invariants),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut all = true;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        all &= outcome.pass;
        println!(
            "{} criterion {n} ({name}): {} [{:.1}s]",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
