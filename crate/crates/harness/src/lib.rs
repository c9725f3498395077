//! Replicated experiments on the epidemic, harvest and synthetic models,
//! with aggregation into mean and standard-error tables.

pub mod config;
pub mod flu;
pub mod mallard;
pub mod radius;
pub mod regret;
pub mod report;
pub mod runner;

pub use config::ExperimentConfig;
pub use flu::{run_flu, FluExperiment, FluResults, FluRow, FluStrategy};
pub use mallard::{run_mallard, AdpParameter, MallardExperiment, MallardResults, MallardRow, MallardStrategy};
pub use radius::{run_radius, RadiusExperiment, RadiusInstance, RadiusResults, RadiusRow};
pub use regret::{run_regret_curve, RegretCurve, RegretExperiment, RegretPoint, RegretRow};
pub use report::{aggregate, mean_se_display, paired_t_test, write_rows, AggregateRow, PairedTest};
pub use runner::{run_replications, Failure, Replicates, RunSettings};
