//! Small models with exact answers, used for the regret and radius
//! experiments and for checking the planner against enumeration.

use ats_core::decision::expit;
use ats_core::{
    DynamicsModel, LogLikelihood, ParameterVector, Policy, PolicyClass, PolicySpace, Reparam, Result, Transition,
};
use rand::{Rng, RngCore};

/// Repeated bet on a biased coin. Heads (`true`) has probability
/// `expit(theta)` whatever is done; action 1 bets `stake` on heads and
/// action 0 abstains, so `U = stake * a * (2 S' - 1)`.
#[derive(Debug, Clone)]
pub struct CoinChain {
    pub stake: f64,
    reparam: Reparam,
}

impl CoinChain {
    pub fn new(stake: f64) -> Self {
        Self {
            stake,
            reparam: Reparam::identity(1),
        }
    }

    /// Discounted value of always playing `action` for `horizon` steps.
    pub fn exact_value(&self, theta: f64, action: usize, horizon: usize, gamma: f64) -> f64 {
        let per_step = self.stake * action as f64 * (2.0 * expit(theta) - 1.0);
        (0..horizon).map(|k| gamma.powi(k as i32)).sum::<f64>() * per_step
    }
}

impl DynamicsModel for CoinChain {
    type State = bool;
    type Action = usize;

    fn reparam(&self) -> &Reparam {
        &self.reparam
    }

    fn sample_transition(
        &self,
        _: &bool,
        action: &usize,
        theta: &ParameterVector,
        rng: &mut dyn RngCore,
    ) -> Result<(bool, f64)> {
        let heads = rng.random::<f64>() < expit(theta[0]);
        let sign = if heads { 1.0 } else { -1.0 };
        Ok((heads, self.stake * *action as f64 * sign))
    }

    fn log_density(&self, next: &bool, _: &bool, _: &usize, theta: &ParameterVector) -> f64 {
        let p = expit(theta[0]);
        if *next {
            p.ln()
        } else {
            (1.0 - p).ln()
        }
    }

    fn likelihood<'a>(&'a self, data: &[Transition<'a, bool, usize>]) -> Box<dyn LogLikelihood + 'a> {
        let heads = data.iter().filter(|t| *t.next).count() as f64;
        Box::new(CoinLikelihood {
            heads,
            tails: data.len() as f64 - heads,
        })
    }
}

/// Binomial log-likelihood from the two outcome counts.
#[derive(Debug, Clone, Copy)]
pub struct CoinLikelihood {
    pub heads: f64,
    pub tails: f64,
}

impl LogLikelihood for CoinLikelihood {
    fn evaluate(&self, theta: &[f64]) -> f64 {
        let p = expit(theta[0]);
        let v = self.heads * p.ln() + self.tails * (1.0 - p).ln();
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    fn transitions(&self) -> usize {
        (self.heads + self.tails) as usize
    }

    fn gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        let p = expit(theta[0]);
        Some(vec![self.heads - (self.heads + self.tails) * p])
    }
}

/// Always plays the same action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstantAction(pub usize);

impl<S> Policy<S, usize> for ConstantAction {
    fn act(&self, _: &S, _: &mut dyn RngCore) -> usize {
        self.0
    }
}

/// The finite class of constant-action policies on `0..n`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantClass(pub usize);

impl<M: DynamicsModel<Action = usize>> PolicyClass<M> for ConstantClass {
    type Policy = ConstantAction;

    fn space(&self) -> PolicySpace {
        PolicySpace::Finite(self.0)
    }

    fn build(&self, params: &[f64], _: &ParameterVector) -> ConstantAction {
        ConstantAction(params[0] as usize)
    }
}

/// Two states and two actions with `P(s' = 1 | s, a) = expit(theta[2s + a])`
/// and utility `table[s][a][s']`.
#[derive(Debug, Clone)]
pub struct TwoStateChain {
    pub table: [[[f64; 2]; 2]; 2],
    reparam: Reparam,
}

impl TwoStateChain {
    pub fn new(table: [[[f64; 2]; 2]; 2]) -> Self {
        Self {
            table,
            reparam: Reparam::identity(4),
        }
    }

    /// Random utilities in [-1, 1).
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut table = [[[0.0; 2]; 2]; 2];
        for v in table.iter_mut().flatten().flatten() {
            *v = rng.random_range(-1.0..1.0);
        }
        Self::new(table)
    }

    /// Truncated value of the rule `a = rule[s]` by summing over all `2^horizon`
    /// outcome paths.
    pub fn exact_value(&self, theta: &[f64], rule: [usize; 2], start: usize, horizon: usize, gamma: f64) -> f64 {
        if horizon == 0 {
            return 0.0;
        }
        let a = rule[start];
        let p1 = expit(theta[2 * start + a]);
        [(0, 1.0 - p1), (1, p1)]
            .iter()
            .map(|&(next, p)| {
                p * (self.table[start][a][next] + gamma * self.exact_value(theta, rule, next, horizon - 1, gamma))
            })
            .sum()
    }
}

impl DynamicsModel for TwoStateChain {
    type State = usize;
    type Action = usize;

    fn reparam(&self) -> &Reparam {
        &self.reparam
    }

    fn sample_transition(
        &self,
        s: &usize,
        a: &usize,
        theta: &ParameterVector,
        rng: &mut dyn RngCore,
    ) -> Result<(usize, f64)> {
        let next = usize::from(rng.random::<f64>() < expit(theta[2 * s + a]));
        Ok((next, self.table[*s][*a][next]))
    }

    fn log_density(&self, next: &usize, s: &usize, a: &usize, theta: &ParameterVector) -> f64 {
        let p = expit(theta[2 * s + a]);
        if *next == 1 {
            p.ln()
        } else {
            (1.0 - p).ln()
        }
    }
}

/// State-feedback rule `a = rule[s]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateRule(pub [usize; 2]);

impl Policy<usize, usize> for StateRule {
    fn act(&self, s: &usize, _: &mut dyn RngCore) -> usize {
        self.0[*s]
    }
}

/// The four deterministic rules, member `i` being `[i / 2, i % 2]`.
#[derive(Debug, Clone, Copy)]
pub struct StateRuleClass;

impl StateRuleClass {
    pub fn rule(i: usize) -> [usize; 2] {
        [i / 2, i % 2]
    }
}

impl PolicyClass<TwoStateChain> for StateRuleClass {
    type Policy = StateRule;

    fn space(&self) -> PolicySpace {
        PolicySpace::Finite(4)
    }

    fn build(&self, params: &[f64], _: &ParameterVector) -> StateRule {
        StateRule(Self::rule(params[0] as usize))
    }
}
