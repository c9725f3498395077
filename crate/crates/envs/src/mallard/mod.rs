//! Age- and sex-structured mallard population under annual harvest practices.
//!
//! Populations follow fixed difference equations given the practice and the
//! reproductive rate; only the pond count is random, an AR(1) with unknown
//! coefficients `(beta0, beta1)`, censored at zero.

mod config;
mod dynamics;

pub use config::{read_history_csv, utility_to_harvest, write_history_csv, write_years_csv, MallardConfig, YearRow};
pub use dynamics::{
    harvest, ln_normal_cdf, next_populations, pond_least_squares, pond_log_density, reproduction_rate, MallardModel,
    MallardState, PondLikelihood, Practice, SurvivalTable, DETERMINISTIC_TOL, HARVEST_SCALE, MALE_YOUNG, POND_SD,
};
