#![allow(dead_code)]

use std::sync::Arc;

use ats_envs::flu::{FluState, Location, Population, Role, SUSCEPTIBLE};
use ats_envs::network::Graph;

/// A population with the given per-location edge lists; every agent is its
/// own family and all students share school 0, all employees employer 0.
pub fn population(roles: &[Role], ages: &[u8], edges: &[(Location, &[(usize, usize)])]) -> Arc<Population> {
    let n = roles.len();
    let mut networks: [Graph; 4] = std::array::from_fn(|_| Graph::empty(n));
    for (loc, list) in edges {
        networks[*loc as usize] = Graph::from_edges(n, list.iter().copied());
    }
    Arc::new(Population {
        role: roles.to_vec(),
        age: ages.to_vec(),
        family: (0..n as u32).collect(),
        institution: roles.iter().map(|r| if *r == Role::Retired { u32::MAX } else { 0 }).collect(),
        networks,
    })
}

pub fn state(pop: Arc<Population>, status: &[u8], susceptibility: &[f64], day: u32) -> FluState {
    let n = pop.len();
    FluState {
        population: pop,
        status: status.to_vec(),
        susceptibility: susceptibility.to_vec(),
        attended: vec![Location::Home as u8; n],
        day,
    }
}

pub fn all_susceptible(pop: Arc<Population>) -> FluState {
    let n = pop.len();
    state(pop, &vec![SUSCEPTIBLE; n], &vec![0.0; n], 0)
}

pub fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
