//! Hypervolume-based reward scalarization for group-relative policy
//! optimization.
//!
//! The crate bundles an exact hypervolume indicator, the linear and HVO
//! scalarizers with a length-constraint reward, synthetic tasks whose
//! objectives conflict by construction, and a small tabular GRPO trainer
//! for comparing the two scalarizers end to end.

pub mod env;
pub mod error;
pub mod grpo;
pub mod metrics;
pub mod report;
pub mod reward;

pub use env::{make_conflicting_task, ClassFractionModel, RewardModel, SurrogateTask};
pub use error::{HvoError, Result};
pub use grpo::{train, PolicyParams, TrainConfig, TrainLogRecord};
pub use metrics::{
    dimension_std, hypervolume_indicator, overall_score, ReferencePoint, ScoreVector,
};
pub use report::{evaluate_policy, EvalReport};
pub use reward::{
    compose_rewards, conciseness_reward, corpus_mean_cr, group_advantages, hvo_scalarize,
    linear_scalarize, RewardConfig, ScalarizationMode, ScoreMatrix,
};
