//! Environments and comparator strategies for the Thompson sampling engine.

pub mod flu;
pub mod mallard;
pub mod synthetic;
pub mod network;
pub mod baselines;
