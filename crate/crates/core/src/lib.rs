//! Approximate Thompson sampling for Markov decision processes whose
//! transition densities are indexed by a low-dimensional parameter.
//!
//! The crate is environment agnostic. An environment supplies a
//! [`DynamicsModel`] (simulator plus transition log-density) and a
//! [`PolicyClass`]; the [`engine::ThompsonEngine`] then runs the online
//! loop: plan against a perturbed parameter, act, observe, refit.

pub mod decision;
pub mod engine;
mod error;
pub mod estimation;
pub mod nelder_mead;
pub mod policy_eval;
pub mod rng;
pub mod stats;

pub use decision::{
    log_likelihood, DynamicsModel, History, LogLikelihood, ParameterVector, Policy, Record,
    Reparam, Transform, Transition,
};
pub use engine::{
    draw_perturbed_parameters, truncation_horizon, Decision, EngineConfig, EpochDiagnostics,
    ParameterPosterior, ThompsonEngine, UpdateReport,
};
pub use error::{Error, Result};
pub use estimation::{fit_mle, observed_information, FitOptions, FitResult};
pub use policy_eval::{estimate_value, optimize_policy, PolicyClass, PolicySpace, SearchConfig, ValueEstimate};
pub use rng::StreamKey;
