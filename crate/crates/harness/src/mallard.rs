//! Harvest management: fixed practices, fitted value iteration and Thompson
//! sampling over the fixed practices, after a simulated historical period.

use ats_core::rng::tag;
use ats_core::{fit_mle, EngineConfig, Error, History, ParameterVector, Policy, Result, StreamKey, ThompsonEngine};
use ats_envs::baselines::{
    fit_rbf_value_iteration, FixedPractice, FixedPracticeClass, MallardEmbedding, RbfConfig, RbfGreedyPolicy,
    RbfValueFunction,
};
use ats_envs::mallard::{utility_to_harvest, MallardConfig, MallardModel, MallardState, Practice};
use serde::{Deserialize, Serialize};

use crate::report::{aggregate, AggregateRow};
use crate::runner::{run_replications, Failure, RunSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MallardStrategy {
    Liberal,
    Moderate,
    Restricted,
    Closed,
    ApproximateDp,
    Thompson,
}

impl MallardStrategy {
    pub fn label(self) -> &'static str {
        match self {
            MallardStrategy::Liberal => "liberal",
            MallardStrategy::Moderate => "moderate",
            MallardStrategy::Restricted => "restricted",
            MallardStrategy::Closed => "closed",
            MallardStrategy::ApproximateDp => "approximate-dp",
            MallardStrategy::Thompson => "thompson",
        }
    }

    pub fn practice(self) -> Option<Practice> {
        match self {
            MallardStrategy::Liberal => Some(Practice::Liberal),
            MallardStrategy::Moderate => Some(Practice::Moderate),
            MallardStrategy::Restricted => Some(Practice::Restricted),
            MallardStrategy::Closed => Some(Practice::Closed),
            _ => None,
        }
    }
}

/// Parameter the approximate-DP value function is fitted under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdpParameter {
    /// The simulation truth; one fit shared by every replicate.
    #[default]
    Truth,
    /// The maximum-likelihood estimate from each replicate's historical data.
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MallardExperiment {
    #[serde(flatten)]
    pub run: RunSettings,
    /// Environment; `initial_population` is replaced by each entry of `initial_sizes`.
    pub environment: MallardConfig,
    pub initial_sizes: Vec<f64>,
    pub strategies: Vec<MallardStrategy>,
    pub rbf: RbfConfig,
    /// Monte Carlo draws per action in the greedy lookahead of the fitted policy.
    pub lookahead_samples: usize,
    pub adp_parameter: AdpParameter,
    pub engine: EngineConfig,
}

pub fn default_mallard_engine() -> EngineConfig {
    EngineConfig {
        gamma: 0.9,
        rollouts_per_eval: 256,
        ridge: 0.0,
        ..EngineConfig::default()
    }
}

impl Default for MallardExperiment {
    fn default() -> Self {
        Self {
            run: RunSettings {
                replications: 200,
                ..RunSettings::default()
            },
            environment: MallardConfig::default(),
            initial_sizes: vec![6.0, 8.0, 13.0],
            strategies: vec![
                MallardStrategy::Liberal,
                MallardStrategy::Moderate,
                MallardStrategy::Restricted,
                MallardStrategy::ApproximateDp,
                MallardStrategy::Thompson,
            ],
            rbf: RbfConfig::default(),
            lookahead_samples: 32,
            adp_parameter: AdpParameter::Truth,
            engine: default_mallard_engine(),
        }
    }
}

impl MallardExperiment {
    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        self.environment.validate()?;
        self.engine.validate()?;
        self.rbf.validate()?;
        if self.initial_sizes.is_empty() || self.initial_sizes.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Domain("initial sizes must be non-empty and nonnegative".into()));
        }
        if self.strategies.is_empty() || self.lookahead_samples == 0 {
            return Err(Error::Domain("need at least one strategy and one lookahead sample".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MallardRow {
    pub replicate: usize,
    pub initial_population: f64,
    pub strategy: MallardStrategy,
    /// Millions of birds over the management period.
    pub total_harvest: f64,
}

impl MallardRow {
    pub fn group(&self) -> String {
        format!("{}/{}", self.initial_population, self.strategy.label())
    }
}

#[derive(Debug, Clone)]
pub struct MallardResults {
    pub rows: Vec<MallardRow>,
    pub failures: Vec<Failure>,
    /// The shared value function, when the approximate-DP strategy ran under the truth.
    pub value_function: Option<RbfValueFunction>,
}

impl MallardResults {
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let values: Vec<_> = self
            .rows
            .iter()
            .map(|r| (r.group(), "total_harvest".to_string(), r.total_harvest))
            .collect();
        aggregate(&values, 2)
    }

    pub fn series(&self, initial_population: f64, strategy: MallardStrategy) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.initial_population == initial_population && r.strategy == strategy)
            .map(|r| r.total_harvest)
            .collect()
    }

    pub fn mean(&self, initial_population: f64, strategy: MallardStrategy) -> f64 {
        let s = self.series(initial_population, strategy);
        s.iter().sum::<f64>() / s.len() as f64
    }
}

pub fn run_mallard(exp: &MallardExperiment) -> Result<MallardResults> {
    exp.validate()?;
    let model = exp.environment.model()?;
    let theta = exp.environment.theta();
    let embedding = MallardEmbedding {
        class_split: exp.environment.class_split,
    };
    let value_function = if exp.strategies.contains(&MallardStrategy::ApproximateDp)
        && exp.adp_parameter == AdpParameter::Truth
    {
        let key = StreamKey::root(exp.run.master_seed).child(tag::ORACLE);
        let fit = fit_rbf_value_iteration(&model, &theta, &Practice::ALL, &embedding, &exp.rbf, key)?;
        Some(fit.value)
    } else {
        None
    };
    let reps = run_replications(&exp.run, |rep, key| {
        mallard_replicate(exp, &model, value_function.as_ref(), &embedding, rep, key)
    })?;
    Ok(MallardResults {
        rows: reps.completed.into_iter().flat_map(|(_, rows)| rows).collect(),
        failures: reps.failures,
        value_function,
    })
}

fn mallard_replicate(
    exp: &MallardExperiment,
    model: &MallardModel,
    value_function: Option<&RbfValueFunction>,
    embedding: &MallardEmbedding,
    rep: usize,
    key: StreamKey,
) -> Result<Vec<MallardRow>> {
    let beta = exp.environment.beta;
    let theta = exp.environment.theta();
    let mut rows = Vec::new();
    for (k, &size) in exp.initial_sizes.iter().enumerate() {
        let cfg = MallardConfig {
            initial_population: size,
            ..exp.environment.clone()
        };
        let skey = key.child(k as u64);
        let (history, start) = cfg.simulate_history(skey.child(tag::HISTORY))?;
        let year_rng = |y: usize| skey.path(&[tag::ENVIRONMENT, y as u64]).rng();
        for (s, &strategy) in exp.strategies.iter().enumerate() {
            let mut policy_rng = skey.path(&[tag::POLICY, s as u64]).rng();
            let mut rollout = |policy: &dyn Policy<MallardState, Practice>| {
                let mut state = start;
                let mut total = 0.0;
                for y in 0..cfg.horizon {
                    let action = policy.act(&state, &mut policy_rng);
                    let (next, u) = model.step(&state, action, beta, &mut year_rng(y));
                    total += utility_to_harvest(u);
                    state = next;
                }
                total
            };
            let total = match strategy {
                MallardStrategy::ApproximateDp => {
                    let (theta, own);
                    let value = match value_function {
                        Some(v) => {
                            theta = exp.environment.theta();
                            v
                        }
                        None => {
                            theta = estimate(exp, model, &history, &start)?;
                            let fit = fit_rbf_value_iteration(
                                model,
                                &theta,
                                &Practice::ALL,
                                embedding,
                                &exp.rbf,
                                skey.child(tag::ORACLE),
                            )?;
                            own = fit.value;
                            &own
                        }
                    };
                    rollout(&RbfGreedyPolicy {
                        model,
                        theta,
                        value,
                        actions: Practice::ALL.to_vec(),
                        embedding,
                        samples: exp.lookahead_samples,
                    })
                }
                MallardStrategy::Thompson => {
                    let mut engine = ThompsonEngine::new(model, &FixedPracticeClass, exp.engine.clone(), theta.clone())?
                        .with_streams(skey.child(tag::PLAN));
                    engine.prime(history.clone(), &start);
                    let mut state = start;
                    let mut total = 0.0;
                    for y in 0..cfg.horizon {
                        let (next, u, _) =
                            engine.ts_epoch(&state, |a| Ok(model.step(&state, *a, beta, &mut year_rng(y))))?;
                        total += utility_to_harvest(u);
                        state = next;
                    }
                    total
                }
                fixed => rollout(&FixedPractice(fixed.practice().expect("fixed practice"))),
            };
            rows.push(MallardRow {
                replicate: rep,
                initial_population: size,
                strategy,
                total_harvest: total,
            });
        }
    }
    Ok(rows)
}

fn estimate(
    exp: &MallardExperiment,
    model: &MallardModel,
    history: &History<MallardState, Practice>,
    current: &MallardState,
) -> Result<ParameterVector> {
    let fit = fit_mle(model, &history.transitions_to(current), &exp.environment.theta(), &exp.engine.fit_options())?;
    Ok(fit.theta_hat)
}
