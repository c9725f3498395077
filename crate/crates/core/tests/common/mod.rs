#![allow(dead_code)]

use ats_core::decision::expit;
use ats_core::{
    DynamicsModel, ParameterVector, Policy, PolicyClass, PolicySpace, Reparam, Result,
};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

/// Deterministic one-state model: action `a` pays `payoff[a]` every step.
pub struct ConstantChain {
    pub payoff: Vec<f64>,
    pub reparam: Reparam,
}

impl ConstantChain {
    pub fn new(payoff: Vec<f64>) -> Self {
        Self {
            payoff,
            reparam: Reparam::identity(1),
        }
    }
}

impl DynamicsModel for ConstantChain {
    type State = ();
    type Action = usize;

    fn reparam(&self) -> &Reparam {
        &self.reparam
    }

    fn sample_transition(&self, _: &(), a: &usize, _: &ParameterVector, _: &mut dyn RngCore) -> Result<((), f64)> {
        Ok(((), self.payoff[*a]))
    }

    fn log_density(&self, _: &(), _: &(), _: &usize, _: &ParameterVector) -> f64 {
        0.0
    }
}

/// Always plays the same action.
pub struct Fixed(pub usize);

impl<S> Policy<S, usize> for Fixed {
    fn act(&self, _: &S, _: &mut dyn RngCore) -> usize {
        self.0
    }
}

/// Finite class of constant-action policies.
pub struct ArmClass(pub usize);

impl<M: DynamicsModel<Action = usize>> PolicyClass<M> for ArmClass {
    type Policy = Fixed;

    fn space(&self) -> PolicySpace {
        PolicySpace::Finite(self.0)
    }

    fn build(&self, params: &[f64], _: &ParameterVector) -> Fixed {
        Fixed(params[0] as usize)
    }
}

/// Gaussian AR(1) without actions: `s' = rho s + sigma e`, `theta = (rho, ln sigma)`.
pub struct Ar1 {
    pub reparam: Reparam,
}

impl Ar1 {
    pub fn new() -> Self {
        Self {
            reparam: Reparam::identity(2),
        }
    }
}

impl DynamicsModel for Ar1 {
    type State = f64;
    type Action = ();

    fn reparam(&self) -> &Reparam {
        &self.reparam
    }

    fn sample_transition(&self, s: &f64, _: &(), theta: &ParameterVector, rng: &mut dyn RngCore) -> Result<(f64, f64)> {
        let e: f64 = rng.sample(StandardNormal);
        Ok((theta[0] * s + theta[1].exp() * e, 0.0))
    }

    fn log_density(&self, next: &f64, s: &f64, _: &(), theta: &ParameterVector) -> f64 {
        let sigma = theta[1].exp();
        let z = (next - theta[0] * s) / sigma;
        -0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln() - 0.5 * z * z
    }
}

pub fn simulate_ar1(rho: f64, sigma: f64, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut s = vec![0.0];
    for _ in 0..n {
        let e: f64 = rng.sample(StandardNormal);
        s.push(rho * s.last().unwrap() + sigma * e);
    }
    s
}

/// Action-independent coin: `S' ~ Bernoulli(expit(theta))`, `U = stake * a * (2 S' - 1)`.
pub struct Coin {
    pub stake: f64,
    pub reparam: Reparam,
}

impl Coin {
    pub fn new(stake: f64) -> Self {
        Self {
            stake,
            reparam: Reparam::identity(1),
        }
    }
}

impl DynamicsModel for Coin {
    type State = bool;
    type Action = usize;

    fn reparam(&self) -> &Reparam {
        &self.reparam
    }

    fn sample_transition(&self, _: &bool, a: &usize, theta: &ParameterVector, rng: &mut dyn RngCore) -> Result<(bool, f64)> {
        let heads = rng.random::<f64>() < expit(theta[0]);
        let sign = if heads { 1.0 } else { -1.0 };
        Ok((heads, self.stake * *a as f64 * sign))
    }

    fn log_density(&self, next: &bool, _: &bool, _: &usize, theta: &ParameterVector) -> f64 {
        let p = expit(theta[0]);
        if *next {
            p.ln()
        } else {
            (1.0 - p).ln()
        }
    }
}

/// Two states, two actions: `P(s' = 1 | s, a) = expit(theta[2s + a])`,
/// utility `table[s][a][s']`.
pub struct TwoByTwo {
    pub table: [[[f64; 2]; 2]; 2],
    pub reparam: Reparam,
}

impl TwoByTwo {
    pub fn new(table: [[[f64; 2]; 2]; 2]) -> Self {
        Self {
            table,
            reparam: Reparam::identity(4),
        }
    }

    pub fn shifted(&self, c: f64) -> Self {
        let mut table = self.table;
        for v in table.iter_mut().flatten().flatten() {
            *v += c;
        }
        Self::new(table)
    }

    /// Exact truncated value by enumerating all outcome paths.
    pub fn exact_value(&self, theta: &[f64], rule: [usize; 2], start: usize, horizon: usize, gamma: f64) -> f64 {
        fn go(m: &TwoByTwo, th: &[f64], rule: [usize; 2], s: usize, left: usize, gamma: f64) -> f64 {
            if left == 0 {
                return 0.0;
            }
            let a = rule[s];
            let p1 = expit(th[2 * s + a]);
            [(0, 1.0 - p1), (1, p1)]
                .iter()
                .map(|&(n, p)| p * (m.table[s][a][n] + gamma * go(m, th, rule, n, left - 1, gamma)))
                .sum()
        }
        go(self, theta, rule, start, horizon, gamma)
    }
}

impl DynamicsModel for TwoByTwo {
    type State = usize;
    type Action = usize;

    fn reparam(&self) -> &Reparam {
        &self.reparam
    }

    fn sample_transition(&self, s: &usize, a: &usize, theta: &ParameterVector, rng: &mut dyn RngCore) -> Result<(usize, f64)> {
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

/// Deterministic state-feedback rule `a = rule[s]`.
pub struct Rule(pub [usize; 2]);

impl Policy<usize, usize> for Rule {
    fn act(&self, s: &usize, _: &mut dyn RngCore) -> usize {
        self.0[*s]
    }
}

/// The four deterministic rules on the 2x2 model, indexed `2 * rule[0] + rule[1]`.
pub struct RuleClass;

impl RuleClass {
    pub fn rule(i: usize) -> [usize; 2] {
        [i / 2, i % 2]
    }
}

impl PolicyClass<TwoByTwo> for RuleClass {
    type Policy = Rule;

    fn space(&self) -> PolicySpace {
        PolicySpace::Finite(4)
    }

    fn build(&self, params: &[f64], _: &ParameterVector) -> Rule {
        Rule(Self::rule(params[0] as usize))
    }
}

pub fn random_table(rng: &mut impl Rng) -> [[[f64; 2]; 2]; 2] {
    let mut t = [[[0.0; 2]; 2]; 2];
    for v in t.iter_mut().flatten().flatten() {
        *v = rng.random_range(-1.0..1.0);
    }
    t
}
