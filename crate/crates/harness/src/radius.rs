//! How far the working parameter can stray from the truth before the policy
//! chosen under it loses more than `delta` against the optimal one.

use ats_core::{Error, Result, StreamKey};
use ats_envs::synthetic::{CoinChain, StateRuleClass, TwoStateChain};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::runner::{run_replications, Failure, RunSettings};

/// Model with exactly computable policy values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RadiusInstance {
    /// Abstain (0) or bet (1) on a coin with logit `theta`.
    Coin { theta: f64, stake: f64 },
    /// Two-state chain; the four state-feedback rules are compared.
    TwoState {
        table: [[[f64; 2]; 2]; 2],
        theta: [f64; 4],
        #[serde(default)]
        start: usize,
    },
}

impl RadiusInstance {
    pub fn dim(&self) -> usize {
        match self {
            RadiusInstance::Coin { .. } => 1,
            RadiusInstance::TwoState { .. } => 4,
        }
    }

    pub fn theta_star(&self) -> Vec<f64> {
        match self {
            RadiusInstance::Coin { theta, .. } => vec![*theta],
            RadiusInstance::TwoState { theta, .. } => theta.to_vec(),
        }
    }

    /// Exact value of every policy in the class at `theta`.
    pub fn values(&self, theta: &[f64], horizon: usize, gamma: f64) -> Vec<f64> {
        match self {
            RadiusInstance::Coin { stake, .. } => {
                let coin = CoinChain::new(*stake);
                (0..2).map(|a| coin.exact_value(theta[0], a, horizon, gamma)).collect()
            }
            RadiusInstance::TwoState { table, start, .. } => {
                let chain = TwoStateChain::new(*table);
                (0..4)
                    .map(|i| chain.exact_value(theta, StateRuleClass::rule(i), *start, horizon, gamma))
                    .collect()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            RadiusInstance::Coin { theta, stake } => theta.is_finite() && stake.is_finite(),
            RadiusInstance::TwoState { table, theta, start } => {
                *start < 2 && theta.iter().chain(table.iter().flatten().flatten()).all(|v| v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain("radius instance has non-finite entries or a bad start state".into()))
        }
    }
}

/// First index of the largest value.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadiusExperiment {
    /// Each replicate draws its own set of directions.
    #[serde(flatten)]
    pub run: RunSettings,
    pub instance: RadiusInstance,
    pub horizon: usize,
    pub gamma: f64,
    /// Tolerated regret.
    pub delta: f64,
    /// Increasing grid of distances from the truth.
    pub epsilons: Vec<f64>,
    /// Random unit directions probed at each distance.
    pub directions: usize,
}

impl Default for RadiusExperiment {
    fn default() -> Self {
        Self {
            run: RunSettings {
                replications: 1,
                ..RunSettings::default()
            },
            instance: RadiusInstance::Coin { theta: 0.3, stake: 1.0 },
            horizon: 10,
            gamma: 0.9,
            delta: 1e-9,
            epsilons: (1..=40).map(|i| i as f64 / 40.0).collect(),
            directions: 64,
        }
    }
}

impl RadiusExperiment {
    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        self.instance.validate()?;
        if self.horizon == 0 || !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Domain("need a positive horizon and gamma in (0, 1]".into()));
        }
        if !(self.delta >= 0.0) || self.directions == 0 {
            return Err(Error::Domain("need delta >= 0 and at least one direction".into()));
        }
        let eps = &self.epsilons;
        if eps.is_empty() || !(eps[0] > 0.0) || eps.windows(2).any(|w| !(w[1] > w[0])) || !eps.iter().all(|e| e.is_finite())
        {
            return Err(Error::Domain("epsilons must be positive, finite and strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusRow {
    pub replicate: usize,
    pub epsilon: f64,
    /// Largest regret found at distances up to `epsilon`.
    pub worst_regret: f64,
}

#[derive(Debug, Clone)]
pub struct RadiusResults {
    pub rows: Vec<RadiusRow>,
    /// Largest grid distance whose worst regret is at most `delta`, per
    /// replicate; 0 when even the smallest distance exceeds it.
    pub radii: Vec<(usize, f64)>,
    pub failures: Vec<Failure>,
}

pub fn run_radius(exp: &RadiusExperiment) -> Result<RadiusResults> {
    exp.validate()?;
    let theta_star = exp.instance.theta_star();
    let truth = exp.instance.values(&theta_star, exp.horizon, exp.gamma);
    let optimum = truth[argmax(&truth)];
    let reps = run_replications(&exp.run, |_, key| Ok(worst_regrets(exp, &theta_star, &truth, optimum, key)))?;
    let mut rows = Vec::new();
    let mut radii = Vec::new();
    for (rep, worst) in reps.completed {
        let mut radius = 0.0;
        for (&epsilon, &w) in exp.epsilons.iter().zip(&worst) {
            if w <= exp.delta {
                radius = epsilon;
            }
            rows.push(RadiusRow {
                replicate: rep,
                epsilon,
                worst_regret: w,
            });
        }
        radii.push((rep, radius));
    }
    Ok(RadiusResults {
        rows,
        radii,
        failures: reps.failures,
    })
}

/// Running maximum of the regret over the grid, so the result is monotone.
fn worst_regrets(exp: &RadiusExperiment, theta_star: &[f64], truth: &[f64], optimum: f64, key: StreamKey) -> Vec<f64> {
    let dim = theta_star.len();
    let mut rng = key.rng();
    let directions: Vec<Vec<f64>> = (0..exp.directions)
        .map(|_| loop {
            let u: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break u.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect();
    let mut running: f64 = 0.0;
    exp.epsilons
        .iter()
        .map(|&eps| {
            for u in &directions {
                let theta: Vec<f64> = theta_star.iter().zip(u).map(|(t, d)| t + eps * d).collect();
                let chosen = argmax(&exp.instance.values(&theta, exp.horizon, exp.gamma));
                running = running.max(optimum - truth[chosen]);
            }
            running
        })
        .collect()
}
