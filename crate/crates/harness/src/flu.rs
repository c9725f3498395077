//! Epidemic control: no treatment, myopic treatment and Thompson sampling on
//! the same simulated outbreaks.

use ats_core::rng::tag;
use ats_core::{fit_mle, EngineConfig, Error, History, Policy, Result, StreamKey, ThompsonEngine};
use ats_envs::baselines::{MyopicPolicy, NoTreatment};
use ats_envs::flu::{FluConfig, FluModel, FluState, PriorityClass, INFECTED, SUSCEPTIBLE};
use ats_envs::network::NetworkKind;
use serde::{Deserialize, Serialize};

use crate::report::{aggregate, AggregateRow};
use crate::runner::{run_replications, Failure, RunSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluStrategy {
    NoTreatment,
    Myopic,
    Thompson,
}

impl FluStrategy {
    pub fn label(self) -> &'static str {
        match self {
            FluStrategy::NoTreatment => "no-treatment",
            FluStrategy::Myopic => "myopic",
            FluStrategy::Thompson => "thompson",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluExperiment {
    #[serde(flatten)]
    pub run: RunSettings,
    /// Environment; its `network` field is replaced by each entry of `networks`.
    pub environment: FluConfig,
    pub networks: Vec<NetworkKind>,
    pub strategies: Vec<FluStrategy>,
    /// Days after which the infected proportions are recorded.
    pub report_days: Vec<usize>,
    pub engine: EngineConfig,
}

/// Engine settings used for the epidemic unless overridden.
pub fn default_flu_engine() -> EngineConfig {
    EngineConfig {
        gamma: 0.7,
        rollouts_per_eval: 8,
        policy_search_budget: 80,
        restarts: 2,
        init_scale: 1.0,
        min_fit_epochs: 5,
        ridge: 0.1,
        ..EngineConfig::default()
    }
}

impl Default for FluExperiment {
    fn default() -> Self {
        Self {
            run: RunSettings::default(),
            environment: FluConfig::default(),
            networks: vec![NetworkKind::BarabasiAlbert, NetworkKind::ErdosRenyi],
            strategies: vec![FluStrategy::NoTreatment, FluStrategy::Myopic, FluStrategy::Thompson],
            report_days: vec![10, 20],
            engine: default_flu_engine(),
        }
    }
}

impl FluExperiment {
    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        self.environment.validate()?;
        self.engine.validate()?;
        if self.networks.is_empty() || self.strategies.is_empty() {
            return Err(Error::Domain("at least one network and one strategy are required".into()));
        }
        if self.report_days.is_empty() || self.report_days.contains(&0) {
            return Err(Error::Domain("report days must be non-empty and positive".into()));
        }
        Ok(())
    }

    pub fn days(&self) -> usize {
        self.report_days.iter().copied().max().unwrap_or(0)
    }
}

/// Proportions for one replicate, network, strategy and report day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluRow {
    pub replicate: usize,
    pub network: NetworkKind,
    pub size: usize,
    pub strategy: FluStrategy,
    pub day: usize,
    pub infected_now: f64,
    pub ever_infected: f64,
}

impl FluRow {
    pub fn group(&self) -> String {
        format!("{}/{}/{}/{}", self.network.label(), self.size, self.strategy.label(), self.day)
    }
}

#[derive(Debug, Clone)]
pub struct FluResults {
    pub rows: Vec<FluRow>,
    pub failures: Vec<Failure>,
}

impl FluResults {
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut values = Vec::new();
        for r in &self.rows {
            values.push((r.group(), "ever_infected".to_string(), r.ever_infected));
            values.push((r.group(), "infected_now".to_string(), r.infected_now));
        }
        aggregate(&values, 3)
    }

    /// Ever-infected proportions of one cell, in replicate order.
    pub fn series(&self, network: NetworkKind, strategy: FluStrategy, day: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.network == network && r.strategy == strategy && r.day == day)
            .map(|r| r.ever_infected)
            .collect()
    }
}

pub fn run_flu(exp: &FluExperiment) -> Result<FluResults> {
    exp.validate()?;
    let reps = run_replications(&exp.run, |rep, key| flu_replicate(exp, rep, key))?;
    Ok(FluResults {
        rows: reps.completed.into_iter().flat_map(|(_, rows)| rows).collect(),
        failures: reps.failures,
    })
}

/// One outbreak per network; every strategy faces the same population,
/// initial infections and environment noise.
pub fn flu_replicate(exp: &FluExperiment, rep: usize, key: StreamKey) -> Result<Vec<FluRow>> {
    let mut rows = Vec::new();
    for (n, &network) in exp.networks.iter().enumerate() {
        let mut cfg = exp.environment.clone();
        cfg.population.network = network;
        let nkey = key.child(n as u64);
        let start = cfg.world(&mut nkey.child(tag::POPULATION).rng())?;
        let model = cfg.model()?;
        for (s, &strategy) in exp.strategies.iter().enumerate() {
            let trajectory = run_strategy(exp, &cfg, &model, &start, strategy, nkey, s as u64)?;
            for &day in &exp.report_days {
                let st = &trajectory[day];
                let size = st.len() as f64;
                rows.push(FluRow {
                    replicate: rep,
                    network,
                    size: st.len(),
                    strategy,
                    day,
                    infected_now: st.count(INFECTED) as f64 / size,
                    ever_infected: 1.0 - st.count(SUSCEPTIBLE) as f64 / size,
                });
            }
        }
    }
    Ok(rows)
}

/// States at days `0..=days` under `strategy`. Day `d` of the environment
/// always draws from `key / ENVIRONMENT / d`.
fn run_strategy(
    exp: &FluExperiment,
    cfg: &FluConfig,
    model: &FluModel,
    start: &FluState,
    strategy: FluStrategy,
    key: StreamKey,
    index: u64,
) -> Result<Vec<FluState>> {
    let truth = cfg.theta.theta()?;
    let params = model.params(&truth);
    let environment = |s: &FluState, a: &Vec<u8>, day: usize| {
        model.step(s, a, &params, &mut key.path(&[tag::ENVIRONMENT, day as u64]).rng())
    };
    let budget = cfg.budget();
    let mut states = vec![start.clone()];
    let mut policy_rng = key.path(&[tag::POLICY, index]).rng();
    match strategy {
        FluStrategy::NoTreatment => {
            for day in 0..exp.days() {
                let s = states.last().expect("non-empty");
                let (next, _) = environment(s, &NoTreatment.act(s, &mut policy_rng), day)?;
                states.push(next);
            }
        }
        FluStrategy::Myopic => {
            // Ranks by risk under its own running estimate, refitted daily
            // with the engine's fit settings.
            let opts = exp.engine.fit_options();
            let mut history: History<FluState, Vec<u8>> = History::new();
            let mut estimate = truth.clone();
            for day in 0..exp.days() {
                let s = states.last().expect("non-empty").clone();
                let action = MyopicPolicy::new(model.params(&estimate), budget).act(&s, &mut policy_rng);
                let (next, u) = environment(&s, &action, day)?;
                history.append(s, action, u)?;
                if history.len() >= exp.engine.min_fit_epochs.max(1) {
                    if let Ok(fit) = fit_mle(model, &history.transitions_to(&next), &estimate, &opts) {
                        estimate = fit.theta_hat;
                    }
                }
                states.push(next);
            }
        }
        FluStrategy::Thompson => {
            let class = PriorityClass {
                model: model.clone(),
                budget,
            };
            let mut engine =
                ThompsonEngine::new(model, &class, exp.engine.clone(), truth.clone())?.with_streams(key.child(tag::PLAN));
            for day in 0..exp.days() {
                let s = states.last().expect("non-empty").clone();
                let (next, _, _) = engine.ts_epoch(&s, |a| environment(&s, a, day))?;
                states.push(next);
            }
        }
    }
    Ok(states)
}
