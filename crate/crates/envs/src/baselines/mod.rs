//! Comparator strategies.

mod flu;
mod mallard;
pub mod rbf;

pub use flu::{MyopicPolicy, NoTreatment};
pub use mallard::{FixedPractice, FixedPracticeClass, MallardEmbedding};
pub use rbf::{first_argmax, fit_rbf_value_iteration, Embedding, RbfConfig, RbfFit, RbfGreedyPolicy, RbfValueFunction};
