//! Desk-scale GRPO: a tabular bigram policy, group sampling, the clipped
//! surrogate objective with its analytic gradient, and the training loop.

pub mod objective;
pub mod policy;
pub mod train;

pub use objective::{importance_ratio, kl_penalty, objective_gradient, surrogate_objective};
pub use policy::{sample_group, GroupRng, GroupSample, PolicyParams};
pub use train::{
    initial_policy, train, train_from, ReferenceMode, TrainConfig, TrainFailure, TrainLogRecord,
    TrainRun,
};
