use std::sync::Arc;

use ats_core::decision::{expit, Transform};
use ats_core::{DynamicsModel, Error, LogLikelihood, ParameterVector, Reparam, Result, Transition};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::likelihood::FluLikelihood;
use super::population::{Location, Population, Role};

pub const SUSCEPTIBLE: u8 = 0;
pub const INFECTED: u8 = 1;
pub const RECOVERED: u8 = 2;

/// Standard deviation of the susceptibility innovation (variance 0.25).
pub const SUSCEPTIBILITY_SD: f64 = 0.5;

/// Dimension of the online parameter (everything except the two
/// initial-susceptibility coefficients).
pub const THETA_DIM: usize = 15;

/// Natural-scale parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluParameters {
    pub zeta0: f64,
    pub zeta1: f64,
    pub p_r1: f64,
    pub p_s1: f64,
    pub p_s2: f64,
    pub p_e1: f64,
    pub p_e2: f64,
    pub rho: f64,
    pub nu: f64,
    pub p_c: f64,
    /// Infection logit coefficients: intercept, age, susceptibility, own
    /// treatment, contact treatment, both treated, squared age gap.
    pub vartheta: [f64; 7],
}

impl Default for FluParameters {
    fn default() -> Self {
        Self::truth()
    }
}

impl FluParameters {
    /// The simulation truth.
    pub fn truth() -> Self {
        Self {
            zeta0: 4.16,
            zeta1: -0.119,
            p_r1: 0.5,
            p_s1: 0.5,
            p_s2: 0.5,
            p_e1: 0.5,
            p_e2: 0.5,
            rho: 0.8,
            nu: -0.01,
            p_c: 0.8,
            vartheta: [-0.5, -0.01, 0.8, -3.5, -3.5, -6.0, -0.001],
        }
    }

    pub fn reparam() -> Reparam {
        let mut t = vec![Transform::Logit; 5];
        t.extend([Transform::Atanh, Transform::Identity, Transform::Logit]);
        t.extend([Transform::Identity; 7]);
        Reparam::new(t)
    }

    fn online(&self) -> [f64; THETA_DIM] {
        let v = &self.vartheta;
        [
            self.p_r1, self.p_s1, self.p_s2, self.p_e1, self.p_e2, self.rho, self.nu, self.p_c, v[0], v[1], v[2], v[3],
            v[4], v[5], v[6],
        ]
    }

    /// Online parameter on the unconstrained scale.
    pub fn theta(&self) -> Result<ParameterVector> {
        Self::reparam().to_unconstrained(&self.online())
    }

    /// Replaces the online part with `theta`, keeping the `zeta` coefficients.
    pub fn with_theta(&self, theta: &ParameterVector) -> Self {
        let n = Self::reparam().to_natural(theta);
        Self {
            zeta0: self.zeta0,
            zeta1: self.zeta1,
            p_r1: n[0],
            p_s1: n[1],
            p_s2: n[2],
            p_e1: n[3],
            p_e2: n[4],
            rho: n[5],
            nu: n[6],
            p_c: n[7],
            vartheta: [n[8], n[9], n[10], n[11], n[12], n[13], n[14]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.theta().map(|_| ()).map_err(|e| Error::Domain(format!("flu parameters: {e}")))?;
        if !(self.zeta0.is_finite() && self.zeta1.is_finite()) {
            return Err(Error::Domain("zeta must be finite".into()));
        }
        Ok(())
    }

    /// Probability that an infected agent still goes out.
    pub fn attendance_probability(&self, role: Role, weekday: bool) -> f64 {
        let p = self.online();
        p[attendance_index(role, weekday)]
    }
}

/// Index of the attendance probability used by `(role, weekday)`.
pub fn attendance_index(role: Role, weekday: bool) -> usize {
    match (role, weekday) {
        (Role::Retired, _) => 0,
        (Role::Student, true) => 1,
        (Role::Student, false) => 2,
        (Role::Employed, true) => 3,
        (Role::Employed, false) => 4,
    }
}

/// Days are numbered from a Monday.
pub fn is_weekday(day: u32) -> bool {
    day % 7 < 5
}

/// Where a healthy agent of this role goes.
pub fn scheduled_location(role: Role, weekday: bool) -> Location {
    match (role, weekday) {
        (Role::Student, true) => Location::School,
        (Role::Employed, true) => Location::Work,
        _ => Location::Public,
    }
}

/// Attendance rule: healthy agents always go to their scheduled place;
/// infected agents go with the role/day probability and otherwise stay home.
/// `u` is a uniform draw on [0, 1).
pub fn daily_attendance(role: Role, weekday: bool, infected: bool, params: &FluParameters, u: f64) -> Location {
    let scheduled = scheduled_location(role, weekday);
    if !infected || u < params.attendance_probability(role, weekday) {
        scheduled
    } else {
        Location::Home
    }
}

/// Per-agent covariates entering the infection logit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exposure {
    pub age: f64,
    pub susceptibility: f64,
    pub treated: bool,
}

/// Covariates of an infected contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub age: f64,
    pub treated: bool,
}

pub fn contact_logit(params: &FluParameters, target: &Exposure, contact: &Contact) -> f64 {
    let v = &params.vartheta;
    let a_l = f64::from(u8::from(target.treated));
    let a_i = f64::from(u8::from(contact.treated));
    let gap = target.age - contact.age;
    v[0] + v[1] * target.age + v[2] * target.susceptibility + v[3] * a_l + v[4] * a_i + v[5] * a_i * a_l + v[6] * gap * gap
}

/// `1 - prod_i (1 - p_c expit(logit_i))` over the infected contacts.
pub fn infection_probability(params: &FluParameters, target: &Exposure, contacts: &[Contact]) -> f64 {
    let log_escape: f64 = contacts
        .iter()
        .map(|c| (-params.p_c * expit(contact_logit(params, target, c))).ln_1p())
        .sum();
    -log_escape.exp_m1()
}

/// `rho s + nu a + eps`, where `eps` is the innovation (variance 0.25 in the model).
pub fn susceptibility_step(s: f64, treated: bool, params: &FluParameters, eps: f64) -> f64 {
    params.rho * s + params.nu * f64::from(u8::from(treated)) + eps
}

/// Full state of the epidemic at the start of `day`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluState {
    pub population: Arc<Population>,
    pub status: Vec<u8>,
    pub susceptibility: Vec<f64>,
    /// Location codes from the day that led into this state (all home initially).
    pub attended: Vec<u8>,
    pub day: u32,
}

impl FluState {
    pub fn len(&self) -> usize {
        self.status.len()
    }

    pub fn is_empty(&self) -> bool {
        self.status.is_empty()
    }

    pub fn count(&self, status: u8) -> usize {
        self.status.iter().filter(|&&s| s == status).count()
    }

    pub fn exposure(&self, i: usize, treated: bool) -> Exposure {
        Exposure {
            age: f64::from(self.population.age[i]),
            susceptibility: self.susceptibility[i],
            treated,
        }
    }

    /// Infected agents at `loc` (per `attendance`) adjacent to `i` in that location's network.
    pub fn infected_contacts<'a>(
        &'a self,
        i: usize,
        loc: Location,
        attendance: &'a [u8],
    ) -> impl Iterator<Item = usize> + 'a {
        self.population
            .network(loc)
            .neighbors(i)
            .iter()
            .map(|&j| j as usize)
            .filter(move |&j| self.status[j] == INFECTED && attendance[j] == loc as u8)
    }
}

/// Initial state: susceptibility `zeta0 + zeta1 age + N(0, 1)`, a uniformly
/// chosen `floor(fraction * L)` agents infected, day 0 (a Monday).
pub fn initial_state(
    population: Arc<Population>,
    params: &FluParameters,
    infected_fraction: f64,
    rng: &mut impl Rng,
) -> Result<FluState> {
    if !(0.0..=1.0).contains(&infected_fraction) {
        return Err(Error::Domain(format!("infected fraction {infected_fraction} outside [0, 1]")));
    }
    let n = population.len();
    let susceptibility = population
        .age
        .iter()
        .map(|&a| params.zeta0 + params.zeta1 * f64::from(a) + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut status = vec![SUSCEPTIBLE; n];
    let k = (infected_fraction * n as f64).floor() as usize;
    for i in rand::seq::index::sample(rng, n, k) {
        status[i] = INFECTED;
    }
    Ok(FluState {
        population,
        status,
        susceptibility,
        attended: vec![Location::Home as u8; n],
        day: 0,
    })
}

/// Least-squares fit of initial susceptibility on age.
pub fn fit_zeta(state: &FluState) -> (f64, f64) {
    let n = state.len() as f64;
    let ages: Vec<f64> = state.population.age.iter().map(|&a| f64::from(a)).collect();
    let mx = ages.iter().sum::<f64>() / n;
    let my = state.susceptibility.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in ages.iter().zip(&state.susceptibility) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

/// The epidemic as a parametric dynamics model over the online parameter.
#[derive(Debug, Clone)]
pub struct FluModel {
    /// Supplies the frozen `zeta` coefficients.
    pub base: FluParameters,
    /// Daily recovery probability of an infected agent (known).
    pub recovery: f64,
    reparam: Reparam,
}

impl FluModel {
    pub fn new(base: FluParameters, recovery: f64) -> Result<Self> {
        base.validate()?;
        if !(0.0..=1.0).contains(&recovery) {
            return Err(Error::Domain(format!("recovery probability {recovery} outside [0, 1]")));
        }
        Ok(Self {
            base,
            recovery,
            reparam: FluParameters::reparam(),
        })
    }

    pub fn params(&self, theta: &ParameterVector) -> FluParameters {
        self.base.with_theta(theta)
    }

    /// One day: attendance, infections, recoveries, susceptibility updates.
    /// Draws exactly `3L` uniforms then `L` normals, in agent order.
    pub fn step(
        &self,
        state: &FluState,
        action: &[u8],
        params: &FluParameters,
        rng: &mut dyn RngCore,
    ) -> Result<(FluState, f64)> {
        let n = state.len();
        if action.len() != n {
            return Err(Error::Model(format!("action has length {}, population {n}", action.len())));
        }
        let pop = &state.population;
        let weekday = is_weekday(state.day);
        let attended: Vec<u8> = (0..n)
            .map(|i| {
                let u = rng.random::<f64>();
                daily_attendance(pop.role[i], weekday, state.status[i] == INFECTED, params, u) as u8
            })
            .collect();

        // Exposure lists built from the infected side: (susceptible, contact).
        let mut exposures: Vec<(u32, u32)> = Vec::new();
        for j in (0..n).filter(|&j| state.status[j] == INFECTED) {
            let loc = Location::from_code(attended[j])?;
            for &i in pop.network(loc).neighbors(j) {
                if state.status[i as usize] == SUSCEPTIBLE && attended[i as usize] == loc as u8 {
                    exposures.push((i, j as u32));
                }
            }
        }
        exposures.sort_unstable();
        let mut status = state.status.clone();
        let mut contacts = Vec::new();
        let mut new_infections = 0usize;
        let mut cursor = 0;
        for i in 0..n {
            let u = rng.random::<f64>();
            contacts.clear();
            while cursor < exposures.len() && exposures[cursor].0 as usize == i {
                let j = exposures[cursor].1 as usize;
                contacts.push(Contact {
                    age: f64::from(pop.age[j]),
                    treated: action[j] == 1,
                });
                cursor += 1;
            }
            if contacts.is_empty() {
                continue;
            }
            let p = infection_probability(params, &state.exposure(i, action[i] == 1), &contacts);
            if u < p {
                status[i] = INFECTED;
                new_infections += 1;
            }
        }
        for i in 0..n {
            let u = rng.random::<f64>();
            if state.status[i] == INFECTED && u < self.recovery {
                status[i] = RECOVERED;
            }
        }
        let susceptibility = (0..n)
            .map(|i| {
                let eps = SUSCEPTIBILITY_SD * rng.sample::<f64, _>(StandardNormal);
                susceptibility_step(state.susceptibility[i], action[i] == 1, params, eps)
            })
            .collect();
        let next = FluState {
            population: Arc::clone(&state.population),
            status,
            susceptibility,
            attended,
            day: state.day + 1,
        };
        Ok((next, -(new_infections as f64) / n as f64))
    }

    /// Per-agent log-density of a transition; `-inf` when impossible.
    pub fn transition_log_density(&self, next: &FluState, state: &FluState, action: &[u8], params: &FluParameters) -> f64 {
        let n = state.len();
        if next.len() != n || action.len() != n || next.day != state.day + 1 {
            return f64::NEG_INFINITY;
        }
        let pop = &state.population;
        let weekday = is_weekday(state.day);
        let var = SUSCEPTIBILITY_SD * SUSCEPTIBILITY_SD;
        let mut total = 0.0;
        for i in 0..n {
            let scheduled = scheduled_location(pop.role[i], weekday) as u8;
            let went = next.attended[i];
            let before = state.status[i];
            let after = next.status[i];
            if before == INFECTED {
                let p = params.attendance_probability(pop.role[i], weekday);
                total += if went == scheduled {
                    p.ln()
                } else if went == Location::Home as u8 {
                    (1.0 - p).ln()
                } else {
                    return f64::NEG_INFINITY;
                };
                total += match after {
                    RECOVERED => self.recovery.ln(),
                    INFECTED => (1.0 - self.recovery).ln(),
                    _ => return f64::NEG_INFINITY,
                };
            } else if went != scheduled {
                return f64::NEG_INFINITY;
            }
            match (before, after) {
                (SUSCEPTIBLE, SUSCEPTIBLE) | (SUSCEPTIBLE, INFECTED) => {
                    let Ok(loc) = Location::from_code(went) else {
                        return f64::NEG_INFINITY;
                    };
                    let contacts: Vec<Contact> = state
                        .infected_contacts(i, loc, &next.attended)
                        .map(|j| Contact {
                            age: f64::from(pop.age[j]),
                            treated: action[j] == 1,
                        })
                        .collect();
                    let p = infection_probability(params, &state.exposure(i, action[i] == 1), &contacts);
                    total += if after == INFECTED { p.ln() } else { (-p).ln_1p() };
                }
                (RECOVERED, RECOVERED) | (INFECTED, _) => {}
                _ => return f64::NEG_INFINITY,
            }
            let mean = susceptibility_step(state.susceptibility[i], action[i] == 1, params, 0.0);
            let r = next.susceptibility[i] - mean;
            total += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - r * r / (2.0 * var);
        }
        total
    }
}

impl DynamicsModel for FluModel {
    type State = FluState;
    type Action = Vec<u8>;

    fn reparam(&self) -> &Reparam {
        &self.reparam
    }

    fn sample_transition(
        &self,
        state: &FluState,
        action: &Vec<u8>,
        theta: &ParameterVector,
        rng: &mut dyn RngCore,
    ) -> Result<(FluState, f64)> {
        self.step(state, action, &self.params(theta), rng)
    }

    fn log_density(&self, next: &FluState, state: &FluState, action: &Vec<u8>, theta: &ParameterVector) -> f64 {
        self.transition_log_density(next, state, action, &self.params(theta))
    }

    fn likelihood<'a>(&'a self, data: &[Transition<'a, FluState, Vec<u8>>]) -> Box<dyn LogLikelihood + 'a> {
        Box::new(FluLikelihood::new(data, self.recovery))
    }
}
