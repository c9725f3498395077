use ats_core::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::network::{self, Graph, NetworkKind, NetworkParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Student,
    Employed,
    Retired,
}

impl Role {
    pub fn label(self) -> &'static str {
        match self {
            Role::Student => "student",
            Role::Employed => "employed",
            Role::Retired => "retired",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "student" => Ok(Role::Student),
            "employed" => Ok(Role::Employed),
            "retired" => Ok(Role::Retired),
            _ => Err(Error::Parse(format!("unknown role {s:?}"))),
        }
    }

    /// Inclusive age range.
    pub fn ages(self) -> (u8, u8) {
        match self {
            Role::Student => (1, 25),
            Role::Employed => (15, 65),
            Role::Retired => (50, 90),
        }
    }
}

/// Where an agent spends the day. Each location has its own contact network;
/// at home that is the family network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Location {
    Home = 0,
    School = 1,
    Work = 2,
    Public = 3,
}

impl Location {
    pub const ALL: [Location; 4] = [Location::Home, Location::School, Location::Work, Location::Public];

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::Parse(format!("unknown location code {code}")))
    }

    pub fn label(self) -> &'static str {
        match self {
            Location::Home => "home",
            Location::School => "school",
            Location::Work => "work",
            Location::Public => "public",
        }
    }
}

/// Static part of the world: who everyone is and who knows whom.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub role: Vec<Role>,
    pub age: Vec<u8>,
    pub family: Vec<u32>,
    /// School id for students, employer id for employees, `u32::MAX` for retirees.
    pub institution: Vec<u32>,
    /// Indexed by [`Location`] code: family, school, work, public.
    pub networks: [Graph; 4],
}

impl Population {
    pub fn len(&self) -> usize {
        self.role.len()
    }

    pub fn is_empty(&self) -> bool {
        self.role.is_empty()
    }

    pub fn network(&self, loc: Location) -> &Graph {
        &self.networks[loc as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationConfig {
    pub size: usize,
    pub network: NetworkKind,
    pub network_params: NetworkParams,
    /// Student, employed, retired.
    pub role_fractions: [f64; 3],
    /// One school per this many agents (at least one school).
    pub agents_per_school: usize,
    /// One employer per this many agents (at least one employer).
    pub agents_per_employer: usize,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            size: 1000,
            network: NetworkKind::BarabasiAlbert,
            network_params: NetworkParams::default(),
            role_fractions: [0.25, 0.55, 0.20],
            agents_per_school: 500,
            agents_per_employer: 50,
        }
    }
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Domain("population size must be at least 1".into()));
        }
        let sum: f64 = self.role_fractions.iter().sum();
        if self.role_fractions.iter().any(|f| !(*f >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "role fractions {:?} must be nonnegative and sum to 1",
                self.role_fractions
            )));
        }
        if self.agents_per_school == 0 || self.agents_per_employer == 0 {
            return Err(Error::Domain("agents per institution must be at least 1".into()));
        }
        let p = &self.network_params;
        if !(p.er_mean_degree >= 0.0) || !(0.0..=1.0).contains(&p.ws_rewire) {
            return Err(Error::Domain("invalid network parameters".into()));
        }
        Ok(())
    }
}

/// Family sizes: draw uniformly from 1..=15 while at least 16 agents remain,
/// then put everyone left into one last family.
pub fn partition_families(size: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(size / 8 + 1);
    let mut remaining = size;
    while remaining >= 16 {
        let s = rng.random_range(1..=15);
        sizes.push(s);
        remaining -= s;
    }
    if remaining > 0 {
        sizes.push(remaining);
    }
    sizes
}

pub fn generate_population(cfg: &PopulationConfig, rng: &mut impl Rng) -> Result<Population> {
    cfg.validate()?;
    let n = cfg.size;
    let students = (cfg.role_fractions[0] * n as f64).floor() as usize;
    let retired = ((cfg.role_fractions[2] * n as f64).floor() as usize).min(n - students);
    let mut role = vec![Role::Employed; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for &i in &order[..students] {
        role[i] = Role::Student;
    }
    for &i in &order[students..students + retired] {
        role[i] = Role::Retired;
    }
    let age: Vec<u8> = role
        .iter()
        .map(|r| {
            let (lo, hi) = r.ages();
            rng.random_range(lo..=hi)
        })
        .collect();

    let n_schools = (n / cfg.agents_per_school).max(1);
    let n_employers = (n / cfg.agents_per_employer).max(1);
    let mut institution = vec![u32::MAX; n];
    let mut schools = vec![Vec::new(); n_schools];
    let mut employers = vec![Vec::new(); n_employers];
    for i in 0..n {
        match role[i] {
            Role::Student => {
                let s = rng.random_range(0..n_schools);
                institution[i] = s as u32;
                schools[s].push(i);
            }
            Role::Employed => {
                let e = rng.random_range(0..n_employers);
                institution[i] = e as u32;
                employers[e].push(i);
            }
            Role::Retired => {}
        }
    }

    let sizes = partition_families(n, rng);
    let groups = network::shuffled_groups(&sizes, rng);
    let mut family = vec![0u32; n];
    let mut family_graph = Graph::empty(n);
    for (f, members) in groups.iter().enumerate() {
        for &m in members {
            family[m] = f as u32;
        }
        let clique = Graph::from_edges(
            members.len(),
            (0..members.len()).flat_map(|a| (0..a).map(move |b| (b, a))),
        );
        family_graph.embed(&clique, members);
    }

    let school = institution_graph(cfg, &schools, rng)?;
    let work = institution_graph(cfg, &employers, rng)?;
    let public = network::generate_clamped(cfg.network, n, &cfg.network_params, rng)?;

    Ok(Population {
        role,
        age,
        family,
        institution,
        networks: [family_graph, school, work, public],
    })
}

fn institution_graph(cfg: &PopulationConfig, groups: &[Vec<usize>], rng: &mut impl Rng) -> Result<Graph> {
    let mut g = Graph::empty(cfg.size);
    for members in groups {
        let sub = network::generate_clamped(cfg.network, members.len(), &cfg.network_params, rng)?;
        g.embed(&sub, members);
    }
    Ok(g)
}
