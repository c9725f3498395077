//! Agent-based influenza on contact networks.
//!
//! Each day every agent picks a location (school, work, public space or
//! home) from its role, the day of the week and its health. Susceptible
//! agents can be infected by infected neighbours present at the same
//! location, in that location's network. Treatment lowers the infection
//! logit of the treated agent and of anyone it could infect.

mod config;
mod dynamics;
mod likelihood;
mod policy;
mod population;

pub use config::{read_state_csv, write_state_csv, AgentRow, FluConfig};
pub use dynamics::{
    attendance_index, contact_logit, daily_attendance, fit_zeta, infection_probability, initial_state, is_weekday,
    scheduled_location, susceptibility_step, Contact, Exposure, FluModel, FluParameters, FluState, INFECTED,
    RECOVERED, SUSCEPTIBILITY_SD, SUSCEPTIBLE, THETA_DIM,
};
pub use likelihood::FluLikelihood;
pub use policy::{features, location_probabilities, select_top, PriorityClass, PriorityPolicy, FEATURES, FEATURE_SCALE};
pub use population::{generate_population, partition_families, Location, Population, PopulationConfig, Role};
