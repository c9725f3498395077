use ats_core::{DynamicsModel, ParameterVector, Policy, PolicyClass, PolicySpace};
use rand::{Rng, RngCore};

use super::dynamics::{is_weekday, scheduled_location, FluModel, FluParameters, FluState, INFECTED, SUSCEPTIBLE};
use super::population::Location;

pub const FEATURES: usize = 5;

/// Scale applied to the search coordinates of the priority class so that
/// unit steps move every feature's contribution by a comparable amount
/// (ages span ~90, susceptibility and contact sums span a few units).
pub const FEATURE_SCALE: [f64; FEATURES] = [1.0, 1.0, 0.02, 0.3, 0.3];

/// Probability of being at each location during the day that starts at
/// `state.day`, indexed by location code.
pub fn location_probabilities(state: &FluState, params: &FluParameters) -> Vec<[f64; 4]> {
    let weekday = is_weekday(state.day);
    let pop = &state.population;
    (0..state.len())
        .map(|i| {
            let mut p = [0.0; 4];
            let scheduled = scheduled_location(pop.role[i], weekday) as usize;
            if state.status[i] == INFECTED {
                let go = params.attendance_probability(pop.role[i], weekday);
                p[scheduled] = go;
                p[Location::Home as usize] = 1.0 - go;
            } else {
                p[scheduled] = 1.0;
            }
            p
        })
        .collect()
}

/// Feature vectors `(infected, susceptible, age, susceptibility, contact)`.
///
/// The contact feature sums, over network neighbours of the opposite
/// infection status, the model-implied probability that the pair meets at
/// the same location during the coming day. It is zero for recovered agents.
pub fn features(state: &FluState, params: &FluParameters) -> Vec<[f64; FEATURES]> {
    let n = state.len();
    let pop = &state.population;
    let probs = location_probabilities(state, params);
    let mut contact = vec![0.0; n];
    for a in (0..n).filter(|&a| state.status[a] == INFECTED) {
        for loc in Location::ALL {
            let l = loc as usize;
            if probs[a][l] == 0.0 {
                continue;
            }
            for &b in pop.network(loc).neighbors(a) {
                let b = b as usize;
                if state.status[b] == SUSCEPTIBLE {
                    let d = probs[a][l] * probs[b][l];
                    contact[a] += d;
                    contact[b] += d;
                }
            }
        }
    }
    (0..n)
        .map(|i| {
            [
                f64::from(u8::from(state.status[i] == INFECTED)),
                f64::from(u8::from(state.status[i] == SUSCEPTIBLE)),
                f64::from(pop.age[i]),
                state.susceptibility[i],
                contact[i],
            ]
        })
        .collect()
}

/// Marks the `budget` highest scores with 1. Ties are broken by independent
/// uniform keys, one drawn per agent, so the draw count is fixed.
pub fn select_top(scores: &[f64], budget: usize, rng: &mut dyn RngCore) -> Vec<u8> {
    let n = scores.len();
    let keys: Vec<(f64, f64)> = scores
        .iter()
        .map(|&s| (if s.is_nan() { f64::NEG_INFINITY } else { s }, rng.random::<f64>()))
        .collect();
    let mut out = vec![0u8; n];
    let m = budget.min(n);
    if m == 0 {
        return out;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let desc = |a: &usize, b: &usize| {
        keys[*b]
            .0
            .total_cmp(&keys[*a].0)
            .then(keys[*b].1.total_cmp(&keys[*a].1))
            .then(a.cmp(b))
    };
    if m < n {
        idx.select_nth_unstable_by(m - 1, desc);
    }
    for &i in &idx[..m] {
        out[i] = 1;
    }
    out
}

/// Treats the `budget` agents with the largest `phi . eta`.
#[derive(Debug, Clone)]
pub struct PriorityPolicy {
    pub eta: [f64; FEATURES],
    pub budget: usize,
    pub params: FluParameters,
}

impl PriorityPolicy {
    pub fn scores(&self, state: &FluState) -> Vec<f64> {
        features(state, &self.params)
            .iter()
            .map(|phi| phi.iter().zip(&self.eta).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl Policy<FluState, Vec<u8>> for PriorityPolicy {
    fn act(&self, state: &FluState, rng: &mut dyn RngCore) -> Vec<u8> {
        select_top(&self.scores(state), self.budget, rng)
    }
}

/// The priority-score family indexed by `eta' in R^5`, `eta = eta' * FEATURE_SCALE`.
/// Features are computed under the planning parameter.
#[derive(Debug, Clone)]
pub struct PriorityClass {
    pub model: FluModel,
    pub budget: usize,
}

impl PriorityClass {
    pub fn policy(&self, coords: &[f64], theta: &ParameterVector) -> PriorityPolicy {
        let mut eta = [0.0; FEATURES];
        for (k, e) in eta.iter_mut().enumerate() {
            *e = coords.get(k).copied().unwrap_or(0.0) * FEATURE_SCALE[k];
        }
        PriorityPolicy {
            eta,
            budget: self.budget,
            params: self.model.params(theta),
        }
    }
}

impl PolicyClass<FluModel> for PriorityClass {
    type Policy = PriorityPolicy;

    fn space(&self) -> PolicySpace {
        PolicySpace::Continuous { dim: FEATURES }
    }

    fn build(&self, params: &[f64], theta: &ParameterVector) -> PriorityPolicy {
        debug_assert_eq!(theta.len(), self.model.dim());
        self.policy(params, theta)
    }
}
