use std::io::Write;

use ats_core::{Error, History, ParameterVector, Result, StreamKey};
use serde::{Deserialize, Serialize};

use super::dynamics::{harvest, MallardModel, MallardState, Practice, SurvivalTable, HARVEST_SCALE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MallardConfig {
    /// Total breeding population (millions) in `first_year`.
    pub initial_population: f64,
    /// Shares of adult males, adult females, young males, young females.
    pub class_split: [f64; 4],
    /// Ponds (millions) in `first_year`.
    pub initial_ponds: f64,
    pub beta: [f64; 2],
    pub survival: SurvivalTable,
    pub first_year: u32,
    /// Practices applied in the historical years, one per year from `first_year`.
    pub history: Vec<Practice>,
    /// Years under management after the historical period.
    pub horizon: usize,
}

impl Default for MallardConfig {
    fn default() -> Self {
        let mut history = vec![Practice::Moderate];
        history.extend([Practice::Liberal; 21]);
        Self {
            initial_population: 8.0,
            class_split: [0.3, 0.3, 0.2, 0.2],
            initial_ponds: 3.36,
            beta: [2.2127, 0.3420],
            survival: SurvivalTable::default(),
            first_year: 1995,
            history,
            horizon: 15,
        }
    }
}

impl MallardConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("mallard config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_population.is_finite() && self.initial_population >= 0.0) {
            return Err(Error::Domain(format!("initial population {} must be >= 0", self.initial_population)));
        }
        let sum: f64 = self.class_split.iter().sum();
        if self.class_split.iter().any(|v| !(*v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("class split {:?} must be nonnegative and sum to 1", self.class_split)));
        }
        if !(self.initial_ponds.is_finite() && self.initial_ponds >= 0.0) {
            return Err(Error::Domain(format!("initial ponds {} must be >= 0", self.initial_ponds)));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("beta must be finite".into()));
        }
        self.survival.validate()
    }

    pub fn model(&self) -> Result<MallardModel> {
        MallardModel::new(self.survival.clone())
    }

    pub fn theta(&self) -> ParameterVector {
        ParameterVector::new(self.beta.to_vec()).expect("validated beta is finite")
    }

    /// A state with `total` birds split by `class_split`.
    pub fn state_with(&self, total: f64, ponds: f64, year: u32) -> MallardState {
        let s = self.class_split;
        MallardState {
            adult_male: total * s[0],
            adult_female: total * s[1],
            young_male: total * s[2],
            young_female: total * s[3],
            ponds,
            year,
        }
    }

    pub fn initial_state(&self) -> MallardState {
        self.state_with(self.initial_population, self.initial_ponds, self.first_year)
    }

    /// Simulates the historical period under the true `beta`. Returns the
    /// history and the state at the start of management.
    pub fn simulate_history(&self, key: StreamKey) -> Result<(History<MallardState, Practice>, MallardState)> {
        let model = self.model()?;
        let mut history = History::new();
        let mut state = self.initial_state();
        for (k, &a) in self.history.iter().enumerate() {
            let (next, u) = model.step(&state, a, self.beta, &mut key.child(k as u64).rng());
            history.append(state, a, u)?;
            state = next;
        }
        Ok((history, state))
    }
}

/// One management year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearRow {
    pub year: u32,
    pub adult_male: f64,
    pub adult_female: f64,
    pub young_male: f64,
    pub young_female: f64,
    pub ponds: f64,
    pub rate: f64,
    pub action: Practice,
    /// Unscaled, in millions.
    pub harvest: f64,
}

impl YearRow {
    pub fn new(state: &MallardState, action: Practice, table: &SurvivalTable) -> Self {
        Self {
            year: state.year,
            adult_male: state.adult_male,
            adult_female: state.adult_female,
            young_male: state.young_male,
            young_female: state.young_female,
            ponds: state.ponds,
            rate: state.rate(),
            action,
            harvest: harvest(state, action, table),
        }
    }
}

pub fn write_years_csv<W: Write>(rows: &[YearRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Converts a utility back to millions of birds.
pub fn utility_to_harvest(u: f64) -> f64 {
    u * HARVEST_SCALE
}

pub fn write_history_csv<W: Write>(history: &History<MallardState, Practice>, writer: W) -> Result<()> {
    history.write_csv(writer, MallardState::encode, |a| a.label().to_string())
}

pub fn read_history_csv<R: std::io::Read>(reader: R) -> Result<History<MallardState, Practice>> {
    History::read_csv(reader, MallardState::decode, Practice::parse)
}
