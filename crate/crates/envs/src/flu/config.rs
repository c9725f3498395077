use std::io::{Read, Write};
use std::sync::Arc;

use ats_core::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dynamics::{initial_state, FluModel, FluParameters, FluState, RECOVERED};
use super::population::{generate_population, Location, Population, PopulationConfig, Role};

/// Environment configuration, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluConfig {
    #[serde(flatten)]
    pub population: PopulationConfig,
    pub theta: FluParameters,
    pub recovery_probability: f64,
    /// Share of the population that can be treated each day (`M = floor(share * L)`).
    pub treatment_fraction: f64,
    pub initial_infected_fraction: f64,
    /// Days simulated.
    pub horizon: usize,
}

impl Default for FluConfig {
    fn default() -> Self {
        Self {
            population: PopulationConfig::default(),
            theta: FluParameters::truth(),
            recovery_probability: 0.25,
            treatment_fraction: 0.2,
            initial_infected_fraction: 0.1,
            horizon: 20,
        }
    }
}

impl FluConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("flu config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.population.validate()?;
        self.theta.validate()?;
        for (name, v) in [
            ("recovery_probability", self.recovery_probability),
            ("treatment_fraction", self.treatment_fraction),
            ("initial_infected_fraction", self.initial_infected_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::Domain("horizon must be at least 1".into()));
        }
        Ok(())
    }

    pub fn budget(&self) -> usize {
        (self.treatment_fraction * self.population.size as f64).floor() as usize
    }

    pub fn model(&self) -> Result<FluModel> {
        FluModel::new(self.theta.clone(), self.recovery_probability)
    }

    /// Draws a population and its initial epidemic state.
    pub fn world(&self, rng: &mut impl Rng) -> Result<FluState> {
        let pop = Arc::new(generate_population(&self.population, rng)?);
        initial_state(pop, &self.theta, self.initial_infected_fraction, rng)
    }
}

/// One line of a state snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRow {
    pub agent: usize,
    pub status: u8,
    pub age: u8,
    pub susceptibility: f64,
    pub role: String,
    pub family: u32,
    /// Empty for retirees.
    pub institution: Option<u32>,
    pub attended: String,
}

pub fn write_state_csv<W: Write>(state: &FluState, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let pop = &state.population;
    for i in 0..state.len() {
        let loc = Location::from_code(state.attended[i])?;
        w.serialize(AgentRow {
            agent: i,
            status: state.status[i],
            age: pop.age[i],
            susceptibility: state.susceptibility[i],
            role: pop.role[i].label().to_string(),
            family: pop.family[i],
            institution: (pop.institution[i] != u32::MAX).then_some(pop.institution[i]),
            attended: loc.label().to_string(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a snapshot and checks it row by row (ids in order, known statuses,
/// roles and locations, finite susceptibility).
pub fn read_state_csv<R: Read>(reader: R) -> Result<Vec<AgentRow>> {
    let mut rows = Vec::new();
    for (i, rec) in csv::Reader::from_reader(reader).deserialize::<AgentRow>().enumerate() {
        let row = rec.map_err(|e| Error::Parse(format!("state row {}: {e}", i + 1)))?;
        if row.agent != i {
            return Err(Error::Parse(format!("state row {}: agent id {} out of order", i + 1, row.agent)));
        }
        if row.status > RECOVERED {
            return Err(Error::Parse(format!("state row {}: status {}", i + 1, row.status)));
        }
        if !row.susceptibility.is_finite() {
            return Err(Error::Parse(format!("state row {}: non-finite susceptibility", i + 1)));
        }
        let role = Role::parse(&row.role)?;
        if (role == Role::Retired) != row.institution.is_none() {
            return Err(Error::Parse(format!("state row {}: institution does not match role", i + 1)));
        }
        location_code(&row.attended)?;
        rows.push(row);
    }
    Ok(rows)
}

fn location_code(label: &str) -> Result<u8> {
    Location::ALL
        .iter()
        .find(|l| l.label() == label)
        .map(|l| *l as u8)
        .ok_or_else(|| Error::Parse(format!("unknown location {label:?}")))
}

impl FluState {
    /// Rebuilds a state on an existing population from snapshot rows.
    pub fn from_rows(population: Arc<Population>, rows: &[AgentRow], day: u32) -> Result<Self> {
        if rows.len() != population.len() {
            return Err(Error::Parse(format!(
                "snapshot has {} agents, population {}",
                rows.len(),
                population.len()
            )));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.age != population.age[i] || r.family != population.family[i] || r.role != population.role[i].label() {
                return Err(Error::Parse(format!("agent {i} does not match the population")));
            }
        }
        Ok(Self {
            status: rows.iter().map(|r| r.status).collect(),
            susceptibility: rows.iter().map(|r| r.susceptibility).collect(),
            attended: rows.iter().map(|r| location_code(&r.attended)).collect::<Result<_>>()?,
            population,
            day,
        })
    }
}
