//! Regret of the selected policy as the number of epochs grows, on a biased
//! coin where the optimal policy is known.

use ats_core::rng::tag;
use ats_core::stats::{linear_fit, median, MeanSe};
use ats_core::{
    draw_perturbed_parameters, estimate_value, optimize_policy, truncation_horizon, EngineConfig, Error,
    ParameterVector, Result, SearchConfig, StreamKey, ThompsonEngine,
};
use ats_envs::synthetic::{CoinChain, ConstantAction, ConstantClass};
use serde::{Deserialize, Serialize};

use crate::report::mean_se_display;
use crate::runner::{run_replications, Failure, RunSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegretExperiment {
    /// `replications` is the number of independent seeds.
    #[serde(flatten)]
    pub run: RunSettings,
    /// Probability of heads under the truth.
    pub p_star: f64,
    pub stake: f64,
    /// Epoch counts at which the regret is measured.
    pub grid: Vec<u64>,
    /// Parameter draws averaged per seed and grid point.
    pub draws: usize,
    /// Horizon of the values the regret is measured in.
    pub eval_horizon: usize,
    /// Rollouts behind each oracle value.
    pub oracle_rollouts: usize,
    pub engine: EngineConfig,
    /// Replace the learned policy by the oracle one (a sanity check).
    pub oracle_policy: bool,
}

impl Default for RegretExperiment {
    fn default() -> Self {
        Self {
            run: RunSettings {
                replications: 50,
                ..RunSettings::default()
            },
            p_star: 0.525,
            stake: 1.0,
            grid: vec![64, 128, 256, 512, 1024],
            draws: 200,
            eval_horizon: 20,
            oracle_rollouts: 100_000,
            engine: EngineConfig {
                gamma: 0.5,
                rollouts_per_eval: 2048,
                min_fit_epochs: 2,
                ridge: 0.0,
                ..EngineConfig::default()
            },
            oracle_policy: false,
        }
    }
}

impl RegretExperiment {
    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        self.engine.validate()?;
        if !(self.p_star > 0.0 && self.p_star < 1.0) || !(0.0..=1.0).contains(&self.stake) {
            return Err(Error::Domain("need p_star in (0, 1) and stake in [0, 1]".into()));
        }
        if self.grid.is_empty() || self.grid[0] == 0 || self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("grid must be positive and strictly increasing".into()));
        }
        if self.draws == 0 || self.eval_horizon == 0 || self.oracle_rollouts == 0 {
            return Err(Error::Domain("draws, eval_horizon and oracle_rollouts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub replicate: usize,
    pub t: u64,
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretPoint {
    pub t: u64,
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    pub median: f64,
    pub display: String,
}

#[derive(Debug, Clone)]
pub struct RegretCurve {
    pub points: Vec<RegretPoint>,
    pub rows: Vec<RegretRow>,
    /// Oracle values of abstaining and betting.
    pub oracle_values: [f64; 2],
    /// Slope of `log(mean regret)` on `log t`; `None` when the curve is degenerate.
    pub slope: Option<f64>,
    /// Some mean regret is zero, so no log-log fit exists.
    pub degenerate: bool,
    pub failures: Vec<Failure>,
}

pub fn run_regret_curve(exp: &RegretExperiment) -> Result<RegretCurve> {
    exp.validate()?;
    let coin = CoinChain::new(exp.stake);
    let theta_star = ParameterVector::new(vec![(exp.p_star / (1.0 - exp.p_star)).ln()])?;
    let oracle_key = StreamKey::root(exp.run.master_seed).child(tag::ORACLE);
    let mut oracle_values = [0.0; 2];
    for (a, v) in oracle_values.iter_mut().enumerate() {
        *v = estimate_value(
            &coin,
            &theta_star,
            &ConstantAction(a),
            exp.eval_horizon,
            &false,
            exp.oracle_rollouts,
            exp.engine.gamma,
            oracle_key,
        )?
        .mean;
    }
    let best = if oracle_values[1] > oracle_values[0] { 1 } else { 0 };
    let regret_of = |a: usize| oracle_values[best] - oracle_values[a];

    let reps = run_replications(&exp.run, |rep, key| {
        seed_regrets(exp, &coin, &theta_star, best, &regret_of, key).map(|r| {
            r.into_iter()
                .map(|(t, regret)| RegretRow { replicate: rep, t, regret })
                .collect::<Vec<_>>()
        })
    })?;
    let rows: Vec<RegretRow> = reps.completed.into_iter().flat_map(|(_, r)| r).collect();
    let points: Vec<RegretPoint> = exp
        .grid
        .iter()
        .map(|&t| {
            let xs: Vec<f64> = rows.iter().filter(|r| r.t == t).map(|r| r.regret).collect();
            let s = MeanSe::of(&xs);
            RegretPoint {
                t,
                n: s.n,
                mean: s.mean,
                se: s.se,
                median: median(&xs),
                display: mean_se_display(&s, 4),
            }
        })
        .collect();
    let degenerate = points.iter().any(|p| !(p.mean > 0.0));
    let slope = (!degenerate && points.len() >= 2).then(|| {
        let x: Vec<f64> = points.iter().map(|p| (p.t as f64).ln()).collect();
        let y: Vec<f64> = points.iter().map(|p| p.mean.ln()).collect();
        linear_fit(&x, &y).1
    });
    Ok(RegretCurve {
        points,
        rows,
        oracle_values,
        slope,
        degenerate,
        failures: reps.failures,
    })
}

/// One seed: runs the engine to the end of the grid and, at each grid
/// point, averages the regret of the policy chosen under `draws` fresh
/// parameter draws from the current sampling distribution.
fn seed_regrets(
    exp: &RegretExperiment,
    coin: &CoinChain,
    theta_star: &ParameterVector,
    best: usize,
    regret_of: &dyn Fn(usize) -> f64,
    key: StreamKey,
) -> Result<Vec<(u64, f64)>> {
    let class = ConstantClass(2);
    let mut engine =
        ThompsonEngine::new(coin, &class, exp.engine.clone(), ParameterVector::zeros(1))?.with_streams(key.child(tag::PLAN));
    let mut env = key.child(tag::ENVIRONMENT).rng();
    let mut state = false;
    let mut out = Vec::with_capacity(exp.grid.len());
    let last = *exp.grid.last().expect("validated non-empty");
    for epoch in 1..=last {
        let (next, _, _) = engine.ts_epoch(&state, |a| {
            ats_core::DynamicsModel::sample_transition(coin, &state, a, theta_star, &mut env)
        })?;
        state = next;
        if !exp.grid.contains(&epoch) {
            continue;
        }
        let t = epoch;
        if exp.oracle_policy {
            out.push((t, regret_of(best)));
            continue;
        }
        let posterior = engine
            .posterior()
            .ok_or_else(|| Error::Estimation(format!("no fitted parameter after {t} epochs")))?;
        let horizon = truncation_horizon(t + 1, exp.engine.gamma)?;
        let search = SearchConfig {
            rollouts: exp.engine.rollouts_per_eval,
            ..exp.engine.search()
        };
        let mut total = 0.0;
        for d in 0..exp.draws {
            let dkey = key.path(&[tag::PERTURB, t, d as u64]);
            let theta = draw_perturbed_parameters(posterior, &mut dkey.rng());
            let choice = optimize_policy(coin, &theta, &class, horizon, &state, exp.engine.gamma, &search, dkey)?;
            total += regret_of(choice.params[0] as usize);
        }
        out.push((t, total / exp.draws as f64));
    }
    Ok(out)
}
