use ats_core::{DynamicsModel, Error, LogLikelihood, ParameterVector, Reparam, Result, Transition};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

/// Standard deviation of the pond innovation (millions of ponds).
pub const POND_SD: f64 = 0.25;

/// Fraction of young produced that are male.
pub const MALE_YOUNG: f64 = 0.897;

/// Harvest (millions of birds) is divided by this before it is used as a utility.
pub const HARVEST_SCALE: f64 = 30.0;

/// Absolute tolerance (relative above 1) for matching the population equations.
pub const DETERMINISTIC_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Practice {
    Liberal,
    Moderate,
    Restricted,
    Closed,
}

impl Practice {
    pub const ALL: [Practice; 4] = [Practice::Liberal, Practice::Moderate, Practice::Restricted, Practice::Closed];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Practice::Liberal => "liberal",
            Practice::Moderate => "moderate",
            Practice::Restricted => "restricted",
            Practice::Closed => "closed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| Error::Parse(format!("unknown harvest practice {s:?}")))
    }
}

/// Breeding population (millions) by class, pond count (millions) and year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MallardState {
    pub adult_male: f64,
    pub adult_female: f64,
    pub young_male: f64,
    pub young_female: f64,
    pub ponds: f64,
    pub year: u32,
}

impl MallardState {
    pub fn classes(&self) -> [f64; 4] {
        [self.adult_male, self.adult_female, self.young_male, self.young_female]
    }

    pub fn total(&self) -> f64 {
        self.classes().iter().sum()
    }

    /// Reproductive rate implied by the current ponds and population.
    pub fn rate(&self) -> f64 {
        reproduction_rate(self.ponds, self.total())
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.adult_male, self.adult_female, self.young_male, self.young_female, self.ponds];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain(format!("mallard state has a negative or non-finite entry: {all:?}")));
        }
        Ok(())
    }

    /// `adult_male;adult_female;young_male;young_female;ponds;year`, round-trip exact.
    pub fn encode(&self) -> String {
        format!(
            "{:?};{:?};{:?};{:?};{:?};{}",
            self.adult_male, self.adult_female, self.young_male, self.young_female, self.ponds, self.year
        )
    }

    pub fn decode(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(';').collect();
        if parts.len() != 6 {
            return Err(Error::Parse(format!("mallard state needs 6 fields, got {}", parts.len())));
        }
        let num = |i: usize| -> Result<f64> {
            parts[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("mallard state field {i}: {e}")))
        };
        let state = Self {
            adult_male: num(0)?,
            adult_female: num(1)?,
            young_male: num(2)?,
            young_female: num(3)?,
            ponds: num(4)?,
            year: parts[5]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("mallard year: {e}")))?,
        };
        state.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(state)
    }
}

/// `max(0, 0.7166 + 0.1083 P - 0.0373 N)`.
pub fn reproduction_rate(ponds: f64, total: f64) -> f64 {
    (0.7166 + 0.1083 * ponds - 0.0373 * total).max(0.0)
}

/// Annual survival by class under each practice, indexed by [`Practice::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurvivalTable {
    pub adult_male: [f64; 4],
    pub adult_female: [f64; 4],
    pub young_male: [f64; 4],
    pub young_female: [f64; 4],
}

impl Default for SurvivalTable {
    fn default() -> Self {
        Self {
            adult_male: [0.81, 0.84, 0.88, 0.92],
            adult_female: [0.68, 0.71, 0.75, 0.79],
            young_male: [0.77, 0.80, 0.85, 0.90],
            young_female: [0.64, 0.67, 0.72, 0.77],
        }
    }
}

impl SurvivalTable {
    fn rows(&self) -> [&[f64; 4]; 4] {
        [&self.adult_male, &self.adult_female, &self.young_male, &self.young_female]
    }

    /// Survival of every class under `a`: (AM, AF, YM, YF).
    pub fn survival(&self, a: Practice) -> [f64; 4] {
        self.rows().map(|r| r[a.index()])
    }

    /// Harvest rates: the survival lost relative to a closed season.
    pub fn harvest_rates(&self, a: Practice) -> [f64; 4] {
        let closed = Practice::Closed.index();
        self.rows().map(|r| r[closed] - r[a.index()])
    }

    /// Values in [0, 1], nondecreasing from liberal to closed in every class.
    pub fn validate(&self) -> Result<()> {
        for row in self.rows() {
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) || row.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Domain(format!(
                    "survival row {row:?} must lie in [0, 1] and be nondecreasing from liberal to closed"
                )));
            }
        }
        Ok(())
    }
}

/// Next-year populations from the difference equations (no randomness).
pub fn next_populations(state: &MallardState, action: Practice, table: &SurvivalTable) -> [f64; 4] {
    let [am, af, ym, yf] = state.classes();
    let [s_am, s_af, s_ym, s_yf] = table.survival(action);
    let r = state.rate();
    [
        am * s_am + MALE_YOUNG * am * r * s_ym,
        af * (s_af + r * s_yf),
        ym * s_am + MALE_YOUNG * yf * r * s_ym,
        yf * (s_af + r * s_yf),
    ]
    .map(|v| v.max(0.0))
}

/// Birds harvested (millions) under `action`.
pub fn harvest(state: &MallardState, action: Practice, table: &SurvivalTable) -> f64 {
    state
        .classes()
        .iter()
        .zip(table.harvest_rates(action))
        .map(|(n, h)| n * h)
        .sum()
}

/// `ln Phi(x)` for the standard normal, accurate in the lower tail.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Mills-ratio asymptote.
        -0.5 * x * x - (-x).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }
}

fn normal_log_pdf(residual: f64) -> f64 {
    let var = POND_SD * POND_SD;
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - residual * residual / (2.0 * var)
}

/// Pond log-density: Gaussian above zero, the censored mass `P(X <= 0)` at zero.
pub fn pond_log_density(next: f64, ponds: f64, beta: [f64; 2]) -> f64 {
    let mean = beta[0] + beta[1] * ponds;
    if next > 0.0 {
        normal_log_pdf(next - mean)
    } else if next == 0.0 {
        ln_normal_cdf(-mean / POND_SD)
    } else {
        f64::NEG_INFINITY
    }
}

/// The mallard system with known survival tables. The unknown parameter is
/// `(beta0, beta1)`, both on the identity scale.
#[derive(Debug, Clone)]
pub struct MallardModel {
    pub survival: SurvivalTable,
    reparam: Reparam,
}

impl MallardModel {
    pub fn new(survival: SurvivalTable) -> Result<Self> {
        survival.validate()?;
        Ok(Self {
            survival,
            reparam: Reparam::identity(2),
        })
    }

    /// One year. Draws exactly one standard normal for the ponds.
    pub fn step(
        &self,
        state: &MallardState,
        action: Practice,
        beta: [f64; 2],
        rng: &mut dyn RngCore,
    ) -> (MallardState, f64) {
        let [am, af, ym, yf] = next_populations(state, action, &self.survival);
        let z: f64 = rng.sample(StandardNormal);
        let ponds = (beta[0] + beta[1] * state.ponds + POND_SD * z).max(0.0);
        let next = MallardState {
            adult_male: am,
            adult_female: af,
            young_male: ym,
            young_female: yf,
            ponds,
            year: state.year + 1,
        };
        (next, harvest(state, action, &self.survival) / HARVEST_SCALE)
    }

    /// Errors unless `next` follows `state` under `action` up to the pond draw.
    pub fn check_transition(&self, next: &MallardState, state: &MallardState, action: Practice) -> Result<()> {
        if next.year != state.year + 1 {
            return Err(Error::Model(format!("year {} does not follow {}", next.year, state.year)));
        }
        let expected = next_populations(state, action, &self.survival);
        for (k, (got, want)) in next.classes().iter().zip(expected).enumerate() {
            if !((got - want).abs() <= DETERMINISTIC_TOL * want.abs().max(1.0)) {
                return Err(Error::Model(format!(
                    "impossible transition: class {k} is {got}, the population equations give {want}"
                )));
            }
        }
        if !(next.ponds >= 0.0) {
            return Err(Error::Model(format!("impossible transition: ponds {}", next.ponds)));
        }
        Ok(())
    }

    pub fn log_density_beta(&self, next: &MallardState, state: &MallardState, action: Practice, beta: [f64; 2]) -> f64 {
        if self.check_transition(next, state, action).is_err() {
            return f64::NEG_INFINITY;
        }
        pond_log_density(next.ponds, state.ponds, beta)
    }
}

fn beta_of(theta: &[f64]) -> [f64; 2] {
    [theta[0], theta[1]]
}

impl DynamicsModel for MallardModel {
    type State = MallardState;
    type Action = Practice;

    fn reparam(&self) -> &Reparam {
        &self.reparam
    }

    fn sample_transition(
        &self,
        state: &MallardState,
        action: &Practice,
        theta: &ParameterVector,
        rng: &mut dyn RngCore,
    ) -> Result<(MallardState, f64)> {
        Ok(self.step(state, *action, beta_of(theta.as_slice()), rng))
    }

    fn log_density(&self, next: &MallardState, state: &MallardState, action: &Practice, theta: &ParameterVector) -> f64 {
        self.log_density_beta(next, state, *action, beta_of(theta.as_slice()))
    }

    fn likelihood<'a>(&'a self, data: &[Transition<'a, MallardState, Practice>]) -> Box<dyn LogLikelihood + 'a> {
        Box::new(PondLikelihood::new(self, data))
    }
}

/// Pond likelihood reduced to least-squares sums over uncensored years plus
/// the list of censored ones.
#[derive(Debug, Clone)]
pub struct PondLikelihood {
    transitions: usize,
    possible: bool,
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
    syy: f64,
    /// Pond counts preceding a year with zero ponds.
    censored: Vec<f64>,
}

impl PondLikelihood {
    pub fn new(model: &MallardModel, data: &[Transition<'_, MallardState, Practice>]) -> Self {
        let mut lik = Self {
            transitions: data.len(),
            possible: true,
            n: 0.0,
            sx: 0.0,
            sy: 0.0,
            sxx: 0.0,
            sxy: 0.0,
            syy: 0.0,
            censored: Vec::new(),
        };
        for tr in data {
            if model.check_transition(tr.next, tr.state, *tr.action).is_err() {
                lik.possible = false;
                break;
            }
            let (x, y) = (tr.state.ponds, tr.next.ponds);
            if y > 0.0 {
                lik.n += 1.0;
                lik.sx += x;
                lik.sy += y;
                lik.sxx += x * x;
                lik.sxy += x * y;
                lik.syy += y * y;
            } else {
                lik.censored.push(x);
            }
        }
        lik
    }

    fn value_grad(&self, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        if !self.possible || theta.len() != 2 {
            return f64::NEG_INFINITY;
        }
        let (b0, b1) = (theta[0], theta[1]);
        let var = POND_SD * POND_SD;
        let rss = self.syy - 2.0 * b0 * self.sy - 2.0 * b1 * self.sxy
            + self.n * b0 * b0
            + 2.0 * b0 * b1 * self.sx
            + b1 * b1 * self.sxx;
        let mut total = -0.5 * self.n * (2.0 * std::f64::consts::PI * var).ln() - rss / (2.0 * var);
        let mut g = [
            (self.sy - self.n * b0 - b1 * self.sx) / var,
            (self.sxy - b0 * self.sx - b1 * self.sxx) / var,
        ];
        for &x in &self.censored {
            let z = -(b0 + b1 * x) / POND_SD;
            let lcdf = ln_normal_cdf(z);
            total += lcdf;
            // d ln Phi(z) / d mean = -phi(z) / (sd Phi(z))
            let ratio = (-0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln() - lcdf).exp() / POND_SD;
            g[0] -= ratio;
            g[1] -= ratio * x;
        }
        if let Some(out) = grad {
            out.copy_from_slice(&g);
        }
        if total.is_nan() {
            f64::NEG_INFINITY
        } else {
            total
        }
    }
}

impl LogLikelihood for PondLikelihood {
    fn evaluate(&self, theta: &[f64]) -> f64 {
        self.value_grad(theta, None)
    }

    fn transitions(&self) -> usize {
        self.transitions
    }

    fn gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; 2];
        self.value_grad(theta, Some(&mut g));
        Some(g)
    }
}

/// Closed-form least squares of `P'` on `(1, P)` over consecutive pond counts.
pub fn pond_least_squares(ponds: &[f64]) -> Result<[f64; 2]> {
    if ponds.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            available: ponds.len(),
        });
    }
    let (x, y) = (&ponds[..ponds.len() - 1], &ponds[1..]);
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Numeric("pond series has no variation".into()));
    }
    let b1 = sxy / sxx;
    Ok([my - b1 * mx, b1])
}
