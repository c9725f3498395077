//! The flu log-likelihood reduced to the quantities that depend on theta.
//!
//! Attendance of infected agents contributes binomial counts, susceptibility
//! contributes AR(1) sufficient statistics, recovery is a constant, and each
//! susceptible agent with at least one infected contact contributes one
//! infection term over a flat contact array.

use ats_core::decision::expit;
use ats_core::{LogLikelihood, Transition};

use super::dynamics::{
    attendance_index, is_weekday, scheduled_location, FluState, INFECTED, RECOVERED, SUSCEPTIBILITY_SD, SUSCEPTIBLE,
    THETA_DIM,
};
use super::population::Location;

const RHO: usize = 5;
const NU: usize = 6;
const PC: usize = 7;
const VT: usize = 8;

#[derive(Debug, Clone, Copy)]
struct InfectionTerm {
    start: u32,
    end: u32,
    infected: bool,
    age: f64,
    susceptibility: f64,
    treated: f64,
}

#[derive(Debug, Clone, Copy)]
struct ContactCovariates {
    treated: f64,
    gap_sq: f64,
}

#[derive(Debug, Clone, Default)]
struct ArStats {
    n: f64,
    xx: f64,
    xy: f64,
    yy: f64,
    xa: f64,
    ya: f64,
    aa: f64,
}

#[derive(Debug, Clone)]
pub struct FluLikelihood {
    transitions: usize,
    possible: bool,
    /// Attendances and opportunities per attendance probability.
    went: [f64; 5],
    trials: [f64; 5],
    ar: ArStats,
    terms: Vec<InfectionTerm>,
    contacts: Vec<ContactCovariates>,
    constant: f64,
}

impl FluLikelihood {
    pub fn new(data: &[Transition<'_, FluState, Vec<u8>>], recovery: f64) -> Self {
        let mut lik = Self {
            transitions: data.len(),
            possible: true,
            went: [0.0; 5],
            trials: [0.0; 5],
            ar: ArStats::default(),
            terms: Vec::new(),
            contacts: Vec::new(),
            constant: 0.0,
        };
        for tr in data {
            if !lik.absorb(tr.state, tr.action, tr.next, recovery) {
                lik.possible = false;
                break;
            }
        }
        lik
    }

    /// Adds one transition; returns false if it is impossible under any theta.
    fn absorb(&mut self, state: &FluState, action: &[u8], next: &FluState, recovery: f64) -> bool {
        let n = state.len();
        if next.len() != n || action.len() != n || next.day != state.day + 1 {
            return false;
        }
        let pop = &state.population;
        let weekday = is_weekday(state.day);
        let var = SUSCEPTIBILITY_SD * SUSCEPTIBILITY_SD;
        for i in 0..n {
            let scheduled = scheduled_location(pop.role[i], weekday) as u8;
            let went = next.attended[i];
            let (before, after) = (state.status[i], next.status[i]);
            if before == INFECTED {
                let k = attendance_index(pop.role[i], weekday);
                self.trials[k] += 1.0;
                if went == scheduled {
                    self.went[k] += 1.0;
                } else if went != Location::Home as u8 {
                    return false;
                }
                match after {
                    RECOVERED => self.constant += recovery.ln(),
                    INFECTED => self.constant += (1.0 - recovery).ln(),
                    _ => return false,
                }
            } else if went != scheduled {
                return false;
            }
            match (before, after) {
                (SUSCEPTIBLE, SUSCEPTIBLE) | (SUSCEPTIBLE, INFECTED) => {
                    let Ok(loc) = Location::from_code(went) else {
                        return false;
                    };
                    let start = self.contacts.len() as u32;
                    let age = f64::from(pop.age[i]);
                    for j in state.infected_contacts(i, loc, &next.attended) {
                        let gap = age - f64::from(pop.age[j]);
                        self.contacts.push(ContactCovariates {
                            treated: f64::from(action[j]),
                            gap_sq: gap * gap,
                        });
                    }
                    let end = self.contacts.len() as u32;
                    let infected = after == INFECTED;
                    if start == end {
                        if infected {
                            return false;
                        }
                    } else {
                        self.terms.push(InfectionTerm {
                            start,
                            end,
                            infected,
                            age,
                            susceptibility: state.susceptibility[i],
                            treated: f64::from(action[i]),
                        });
                    }
                }
                (RECOVERED, RECOVERED) | (INFECTED, _) => {}
                _ => return false,
            }
            let (x, y, a) = (state.susceptibility[i], next.susceptibility[i], f64::from(action[i]));
            let ar = &mut self.ar;
            ar.n += 1.0;
            ar.xx += x * x;
            ar.xy += x * y;
            ar.yy += y * y;
            ar.xa += x * a;
            ar.ya += y * a;
            ar.aa += a * a;
        }
        self.constant += -0.5 * n as f64 * (2.0 * std::f64::consts::PI * var).ln();
        true
    }

    /// Value and, when `grad` is given, its gradient on the unconstrained scale.
    fn value_grad(&self, theta: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        if !self.possible || theta.len() != THETA_DIM {
            return f64::NEG_INFINITY;
        }
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut total = self.constant;

        for k in 0..5 {
            let p = expit(theta[k]);
            let (s, n) = (self.went[k], self.trials[k]);
            if n > 0.0 {
                total += s * p.ln() + (n - s) * (1.0 - p).ln();
                if let Some(g) = grad.as_deref_mut() {
                    g[k] = s - n * p;
                }
            }
        }

        let rho = theta[RHO].tanh();
        let nu = theta[NU];
        let ar = &self.ar;
        let rss = ar.yy - 2.0 * rho * ar.xy - 2.0 * nu * ar.ya
            + rho * rho * ar.xx
            + 2.0 * rho * nu * ar.xa
            + nu * nu * ar.aa;
        let var = SUSCEPTIBILITY_SD * SUSCEPTIBILITY_SD;
        total -= rss / (2.0 * var);
        if let Some(g) = grad.as_deref_mut() {
            let d_rho = -2.0 * ar.xy + 2.0 * rho * ar.xx + 2.0 * nu * ar.xa;
            let d_nu = -2.0 * ar.ya + 2.0 * rho * ar.xa + 2.0 * nu * ar.aa;
            g[RHO] = -d_rho / (2.0 * var) * (1.0 - rho * rho);
            g[NU] = -d_nu / (2.0 * var);
        }

        let p_c = expit(theta[PC]);
        let v = &theta[VT..VT + 7];
        let mut gv = [0.0f64; 8];
        for term in &self.terms {
            let base = v[0] + v[1] * term.age + v[2] * term.susceptibility + v[3] * term.treated;
            let mut log_escape = 0.0;
            // Sum over contacts of dq/(1-q), split by coordinate.
            let mut acc = [0.0f64; 8];
            for c in &self.contacts[term.start as usize..term.end as usize] {
                let lin = base + v[4] * c.treated + v[5] * c.treated * term.treated + v[6] * c.gap_sq;
                let e = expit(lin);
                let q = p_c * e;
                log_escape += (-q).ln_1p();
                if grad.is_some() {
                    let inv = 1.0 / (1.0 - q);
                    acc[0] += q * (1.0 - p_c) * inv;
                    let s = p_c * e * (1.0 - e) * inv;
                    acc[1] += s;
                    acc[2] += s * term.age;
                    acc[3] += s * term.susceptibility;
                    acc[4] += s * term.treated;
                    acc[5] += s * c.treated;
                    acc[6] += s * c.treated * term.treated;
                    acc[7] += s * c.gap_sq;
                }
            }
            let weight = if term.infected {
                total += (-log_escape.exp_m1()).ln();
                // d ln(1 - e^L) = e^L / (1 - e^L) * sum dq / (1 - q)
                log_escape.exp() / -log_escape.exp_m1()
            } else {
                total += log_escape;
                -1.0
            };
            if grad.is_some() {
                for (g, a) in gv.iter_mut().zip(&acc) {
                    *g += weight * a;
                }
            }
        }
        if let Some(g) = grad {
            g[PC] = gv[0];
            g[VT..VT + 7].copy_from_slice(&gv[1..]);
        }
        if total.is_nan() {
            f64::NEG_INFINITY
        } else {
            total
        }
    }

    /// Number of susceptible-day records with at least one infected contact.
    pub fn infection_terms(&self) -> usize {
        self.terms.len()
    }
}

impl LogLikelihood for FluLikelihood {
    fn evaluate(&self, theta: &[f64]) -> f64 {
        self.value_grad(theta, None)
    }

    fn transitions(&self) -> usize {
        self.transitions
    }

    fn gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; THETA_DIM];
        self.value_grad(theta, Some(&mut g));
        Some(g)
    }
}
