use ats_core::decision::expit;
use ats_core::Policy;
use rand::RngCore;

use crate::flu::{
    contact_logit, is_weekday, location_probabilities, scheduled_location, select_top, Contact, FluParameters,
    FluState, INFECTED, SUSCEPTIBLE,
};

/// Never treats anyone.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoTreatment;

impl Policy<FluState, Vec<u8>> for NoTreatment {
    fn act(&self, state: &FluState, _: &mut dyn RngCore) -> Vec<u8> {
        vec![0; state.len()]
    }
}

/// Treats the susceptible agents most likely to be infected tomorrow if left
/// untreated, with attendance integrated out analytically.
#[derive(Debug, Clone)]
pub struct MyopicPolicy {
    pub params: FluParameters,
    pub budget: usize,
}

impl MyopicPolicy {
    pub fn new(params: FluParameters, budget: usize) -> Self {
        Self { params, budget }
    }

    /// `1 - prod_j (1 - P(j present) p_c expit(logit_j))` for susceptible
    /// agents; `-1` for everyone else so they rank last.
    pub fn risks(&self, state: &FluState) -> Vec<f64> {
        let pop = &state.population;
        let weekday = is_weekday(state.day);
        let probs = location_probabilities(state, &self.params);
        (0..state.len())
            .map(|i| {
                if state.status[i] != SUSCEPTIBLE {
                    return -1.0;
                }
                let loc = scheduled_location(pop.role[i], weekday);
                let target = state.exposure(i, false);
                let log_escape: f64 = pop
                    .network(loc)
                    .neighbors(i)
                    .iter()
                    .map(|&j| j as usize)
                    .filter(|&j| state.status[j] == INFECTED)
                    .map(|j| {
                        let c = Contact {
                            age: f64::from(pop.age[j]),
                            treated: false,
                        };
                        let q = probs[j][loc as usize] * self.params.p_c * expit(contact_logit(&self.params, &target, &c));
                        (-q).ln_1p()
                    })
                    .sum();
                -log_escape.exp_m1()
            })
            .collect()
    }
}

impl Policy<FluState, Vec<u8>> for MyopicPolicy {
    fn act(&self, state: &FluState, rng: &mut dyn RngCore) -> Vec<u8> {
        select_top(&self.risks(state), self.budget, rng)
    }
}
