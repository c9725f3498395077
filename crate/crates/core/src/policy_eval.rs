//! Truncated Monte Carlo policy values and the search for the best member of
//! a policy class under a fixed parameter.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::decision::{DynamicsModel, ParameterVector, Policy};
use crate::error::{Error, Result};
use crate::nelder_mead::{self, NelderMeadOptions};
use crate::rng::{tag, StreamKey};
use crate::stats::MeanSe;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub rollouts: usize,
    pub horizon: usize,
}

/// Mean discounted utility `sum_{t=1}^{horizon} gamma^{t-1} U^t` of `policy`
/// from `start` under `theta`, averaged over `rollouts` independent rollouts.
///
/// Rollout `r` draws environment noise from `key / r / ENVIRONMENT` and policy
/// tie-breaks from `key / r / POLICY`, so two policies evaluated with the same
/// key share common random numbers.
#[allow(clippy::too_many_arguments)]
pub fn estimate_value<M, P>(
    model: &M,
    theta: &ParameterVector,
    policy: &P,
    horizon: usize,
    start: &M::State,
    rollouts: usize,
    gamma: f64,
    key: StreamKey,
) -> Result<ValueEstimate>
where
    M: DynamicsModel,
    P: Policy<M::State, M::Action> + ?Sized,
{
    if horizon == 0 || rollouts == 0 {
        return Err(Error::Domain("horizon and rollouts must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Domain(format!("discount {gamma} outside [0, 1]")));
    }
    let returns = (0..rollouts)
        .into_par_iter()
        .map(|r| {
            let rkey = key.child(r as u64);
            let mut env_rng = rkey.child(tag::ENVIRONMENT).rng();
            let mut pol_rng = rkey.child(tag::POLICY).rng();
            let mut state = start.clone();
            let mut total = 0.0;
            let mut weight = 1.0;
            for _ in 0..horizon {
                let action = policy.act(&state, &mut pol_rng);
                let (next, u) = model
                    .sample_transition(&state, &action, theta, &mut env_rng)
                    .map_err(|e| Error::Rollout {
                        rollout: r,
                        source: Box::new(e),
                    })?;
                total += weight * u;
                weight *= gamma;
                state = next;
            }
            Ok(total)
        })
        .collect::<Result<Vec<f64>>>()?;
    let m = MeanSe::of(&returns);
    Ok(ValueEstimate {
        mean: m.mean,
        standard_error: m.se,
        rollouts,
        horizon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicySpace {
    /// Members indexed `0..n`; parameters are `[index as f64]`.
    Finite(usize),
    /// Members indexed by a real vector of the given dimension.
    Continuous { dim: usize },
}

/// A parametric family of policies. Members may depend on the planning
/// parameter (for example through model-based features).
pub trait PolicyClass<M: DynamicsModel>: Sync {
    type Policy: Policy<M::State, M::Action>;

    fn space(&self) -> PolicySpace;

    fn build(&self, params: &[f64], theta: &ParameterVector) -> Self::Policy;

    /// Reference member that is always evaluated during continuous search.
    fn origin(&self) -> Vec<f64> {
        match self.space() {
            PolicySpace::Finite(_) => vec![0.0],
            PolicySpace::Continuous { dim } => vec![0.0; dim],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub rollouts: usize,
    /// Maximum number of value evaluations for a continuous class.
    pub budget: usize,
    pub restarts: usize,
    /// Scale of the random initial simplexes.
    pub init_scale: f64,
    pub nelder_mead: NelderMeadOptions,
    /// Continuous classes only: a point to evaluate and start the first
    /// restart from (typically the previous choice).
    pub anchor: Option<Vec<f64>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            rollouts: 64,
            budget: 600,
            restarts: 3,
            init_scale: 1.0,
            nelder_mead: NelderMeadOptions::default(),
            anchor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyChoice {
    pub params: Vec<f64>,
    pub value: ValueEstimate,
    pub evaluations: usize,
    pub budget_exhausted: bool,
}

/// Approximately maximizes the truncated value over `class` at `theta`.
///
/// Every candidate is evaluated with the same rollout streams. Finite classes
/// are enumerated (ties go to the lowest index); continuous classes are
/// searched with Nelder–Mead from `restarts` simplexes (the first centred on
/// `cfg.anchor` when given, the rest random), keeping the best point seen.
/// The anchor (or else the class origin) is evaluated first and ties keep the
/// earlier point, so a flat value surface leaves the previous choice in place.
#[allow(clippy::too_many_arguments)]
pub fn optimize_policy<M, C>(
    model: &M,
    theta: &ParameterVector,
    class: &C,
    horizon: usize,
    start: &M::State,
    gamma: f64,
    cfg: &SearchConfig,
    key: StreamKey,
) -> Result<PolicyChoice>
where
    M: DynamicsModel,
    C: PolicyClass<M>,
{
    let crn = key.child(tag::PLAN);
    let evaluate = |params: &[f64]| -> Result<ValueEstimate> {
        let policy = class.build(params, theta);
        estimate_value(model, theta, &policy, horizon, start, cfg.rollouts, gamma, crn)
    };
    match class.space() {
        PolicySpace::Finite(0) => Err(Error::Domain("empty policy class".into())),
        PolicySpace::Finite(n) => {
            let mut best: Option<(usize, ValueEstimate)> = None;
            for i in 0..n {
                let v = evaluate(&[i as f64])?;
                if best.as_ref().is_none_or(|(_, b)| v.mean > b.mean) {
                    best = Some((i, v));
                }
            }
            let (i, value) = best.expect("non-empty class");
            Ok(PolicyChoice {
                params: vec![i as f64],
                value,
                evaluations: n,
                budget_exhausted: false,
            })
        }
        PolicySpace::Continuous { dim } => {
            let anchor = cfg.anchor.as_ref().filter(|a| a.len() == dim);
            let origin = class.origin();
            let mut best_params = anchor.cloned().unwrap_or_else(|| origin.clone());
            let mut best_value = evaluate(&best_params)?;
            let mut evaluations = 1;
            if anchor.is_some_and(|a| *a != origin) {
                let v = evaluate(&origin)?;
                evaluations += 1;
                if v.mean > best_value.mean {
                    best_value = v;
                    best_params = origin;
                }
            }
            let mut budget_exhausted = false;
            let mut failure: Option<Error> = None;
            let restarts = cfg.restarts.max(1);
            let per_restart = cfg.budget.saturating_sub(evaluations) / restarts;
            for k in 0..restarts {
                let mut init_rng = key.path(&[tag::PERTURB, k as u64]).rng();
                let x0: Vec<f64> = match anchor {
                    Some(a) if k == 0 => a.clone(),
                    _ => (0..dim)
                        .map(|_| cfg.init_scale * init_rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                };
                let opts = NelderMeadOptions {
                    max_evals: per_restart,
                    ..cfg.nelder_mead
                };
                let res = nelder_mead::maximize(
                    |x| {
                        if failure.is_some() {
                            return f64::NEG_INFINITY;
                        }
                        match evaluate(x) {
                            Ok(v) => {
                                if v.mean > best_value.mean {
                                    best_value = v;
                                    best_params = x.to_vec();
                                }
                                v.mean
                            }
                            Err(e) => {
                                failure = Some(e);
                                f64::NEG_INFINITY
                            }
                        }
                    },
                    nelder_mead::axis_simplex(&x0, cfg.init_scale),
                    &opts,
                );
                if let Some(e) = failure.take() {
                    return Err(e);
                }
                evaluations += res.evaluations;
                budget_exhausted |= res.budget_exhausted;
            }
            Ok(PolicyChoice {
                params: best_params,
                value: best_value,
                evaluations,
                budget_exhausted,
            })
        }
    }
}
