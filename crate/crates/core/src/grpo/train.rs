use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{RewardModel, SurrogateTask};
use crate::error::{HvoError, Result};
use crate::grpo::objective::{kl_penalty, objective_gradient, surrogate_objective};
use crate::grpo::policy::{sample_group, GroupRng, GroupSample, PolicyParams};
use crate::metrics::{mean_and_population_std, ScoreVector};
use crate::reward::{compose_rewards, group_advantages, RewardConfig, ScoreMatrix};

/// Which policy the KL penalty pulls towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Snapshot of the current policy at the start of every iteration.
    #[default]
    Refresh,
    /// The initial policy, fixed for the whole run.
    Initial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub group_size: usize,
    pub clip_epsilon: f64,
    pub kl_beta: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub max_output_length: usize,
    pub seed: u64,
    pub reference: ReferenceMode,
    /// Logit offset given to the first dimension's tokens in the initial
    /// policy, so training starts from an imbalanced base policy.
    pub initial_skew: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            clip_epsilon: 0.2,
            kl_beta: 0.04,
            learning_rate: 5e-2,
            iterations: 500,
            max_output_length: 8,
            seed: 0,
            reference: ReferenceMode::Refresh,
            initial_skew: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(HvoError::GroupTooSmall {
                min: 2,
                actual: self.group_size,
            });
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(HvoError::InvalidConfig(format!(
                "clip_epsilon must lie in (0,1), got {}",
                self.clip_epsilon
            )));
        }
        if !(self.kl_beta >= 0.0 && self.kl_beta.is_finite()) {
            return Err(HvoError::InvalidConfig(
                "kl_beta must be non-negative".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(HvoError::InvalidConfig(
                "learning_rate must be non-negative".into(),
            ));
        }
        if self.iterations == 0 {
            return Err(HvoError::InvalidConfig(
                "iterations must be positive".into(),
            ));
        }
        if self.max_output_length == 0 {
            return Err(HvoError::InvalidConfig(
                "max_output_length must be positive".into(),
            ));
        }
        if !self.initial_skew.is_finite() {
            return Err(HvoError::InvalidConfig(
                "initial_skew must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Per-iteration training statistics over the sampled group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub iteration: usize,
    pub per_dimension_group_mean: Vec<f64>,
    pub per_dimension_group_std: Vec<f64>,
    pub mean_scalar_reward: f64,
    pub mean_output_length: f64,
    pub objective_value: f64,
    pub kl_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub policy: PolicyParams,
    pub logs: Vec<TrainLogRecord>,
}

/// A run that stopped early. Carries the records logged before the failure.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{source}")]
pub struct TrainFailure {
    pub source: HvoError,
    pub logs: Vec<TrainLogRecord>,
}

/// Scores and completion lengths for a sampled group.
pub fn score_group(
    task: &SurrogateTask,
    model: &dyn RewardModel,
    samples: &[GroupSample],
) -> Result<Vec<ScoreVector>> {
    samples
        .par_iter()
        .map(|s| model.evaluate(task, &s.tokens))
        .collect()
}

/// `(doc_len, out_len)` pairs for the conciseness reward; empty outputs count
/// as length one.
pub fn length_pairs(task: &SurrogateTask, samples: &[GroupSample]) -> Vec<(usize, usize)> {
    samples
        .iter()
        .map(|s| (task.document_length, s.content_len().max(1)))
        .collect()
}

/// Scores, rewards and advantages for one group, stored on the samples.
pub fn assign_rewards(
    task: &SurrogateTask,
    model: &dyn RewardModel,
    reward_cfg: &RewardConfig,
    samples: &mut [GroupSample],
) -> Result<ScoreMatrix> {
    let scores = ScoreMatrix::new(score_group(task, model, samples)?)?;
    let rewards = compose_rewards(&scores, &length_pairs(task, samples), reward_cfg)?;
    let advantages = group_advantages(&rewards)?;
    for ((s, row), (r, a)) in samples
        .iter_mut()
        .zip(scores.rows())
        .zip(rewards.into_iter().zip(advantages))
    {
        s.scores = Some(row.clone());
        s.reward = r;
        s.advantage = a;
    }
    Ok(scores)
}

/// Starting policy for `train`: uniform logits plus `cfg.initial_skew` on
/// every token of the first score dimension.
pub fn initial_policy(task: &SurrogateTask, cfg: &TrainConfig) -> PolicyParams {
    let mut policy = PolicyParams::uniform(task.vocabulary_size);
    let favoured = task.class_tokens(0);
    for c in 0..policy.contexts() {
        let row = policy.row_mut(c);
        for &t in &favoured {
            row[t] += cfg.initial_skew;
        }
    }
    policy
}

/// Trains from [`initial_policy`].
pub fn train(
    task: &SurrogateTask,
    model: &dyn RewardModel,
    reward_cfg: &RewardConfig,
    train_cfg: &TrainConfig,
) -> std::result::Result<TrainRun, TrainFailure> {
    train_from(
        initial_policy(task, train_cfg),
        task,
        model,
        reward_cfg,
        train_cfg,
    )
}

/// Runs `train_cfg.iterations` rounds of sample, score, scalarize,
/// normalize and one gradient-ascent step.
pub fn train_from(
    initial: PolicyParams,
    task: &SurrogateTask,
    model: &dyn RewardModel,
    reward_cfg: &RewardConfig,
    train_cfg: &TrainConfig,
) -> std::result::Result<TrainRun, TrainFailure> {
    let fail = |source, logs| TrainFailure { source, logs };
    let setup = train_cfg
        .validate()
        .and_then(|_| reward_cfg.validate(model.dimension_count()))
        .and_then(|_| {
            if initial.vocab() != task.vocabulary_size {
                return Err(HvoError::DimensionMismatch {
                    expected: task.vocabulary_size,
                    actual: initial.vocab(),
                });
            }
            Ok(())
        });
    if let Err(e) = setup {
        return Err(fail(e, Vec::new()));
    }

    let fixed_reference = initial.clone();
    let mut policy = initial;
    let mut logs = Vec::with_capacity(train_cfg.iterations);
    for iteration in 0..train_cfg.iterations {
        match step(
            &mut policy,
            &fixed_reference,
            iteration,
            task,
            model,
            reward_cfg,
            train_cfg,
        ) {
            Ok(record) => logs.push(record),
            Err(e) => return Err(fail(e, logs)),
        }
    }
    Ok(TrainRun { policy, logs })
}

fn step(
    policy: &mut PolicyParams,
    fixed_reference: &PolicyParams,
    iteration: usize,
    task: &SurrogateTask,
    model: &dyn RewardModel,
    reward_cfg: &RewardConfig,
    cfg: &TrainConfig,
) -> Result<TrainLogRecord> {
    let old = policy.clone();
    let reference = match cfg.reference {
        ReferenceMode::Refresh => &old,
        ReferenceMode::Initial => fixed_reference,
    };
    let rng = GroupRng::new(cfg.seed, iteration as u64);
    let mut samples = sample_group(&old, cfg.max_output_length, cfg.group_size, rng)?;
    let scores = assign_rewards(task, model, reward_cfg, &mut samples).map_err(|e| match e {
        HvoError::NonFinite(what) => HvoError::Diverged {
            iteration,
            reason: format!("non-finite {what}"),
        },
        other => other,
    })?;
    let advantages: Vec<f64> = samples.iter().map(|s| s.advantage).collect();

    let objective_value = surrogate_objective(policy, reference, &samples, &advantages, cfg)?;
    let kl_value = kl_penalty(policy, reference, &samples);
    let grad = objective_gradient(policy, reference, &samples, &advantages, cfg)?;
    for (l, g) in policy.logits_mut().iter_mut().zip(&grad) {
        *l += cfg.learning_rate * g;
    }
    if !policy.is_finite() || !objective_value.is_finite() {
        return Err(HvoError::Diverged {
            iteration,
            reason: "non-finite parameters".into(),
        });
    }

    let (means, stds) = (0..scores.dims())
        .map(|k| mean_and_population_std(scores.column(k)))
        .unzip();
    let g = samples.len() as f64;
    Ok(TrainLogRecord {
        iteration,
        per_dimension_group_mean: means,
        per_dimension_group_std: stds,
        mean_scalar_reward: samples.iter().map(|s| s.reward).sum::<f64>() / g,
        mean_output_length: samples.iter().map(|s| s.content_len() as f64).sum::<f64>() / g,
        objective_value,
        kl_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::make_conflicting_task;
    use crate::reward::ScalarizationMode;

    fn setup(
        mode: ScalarizationMode,
    ) -> (SurrogateTask, crate::env::ClassFractionModel, RewardConfig) {
        let (task, model) = make_conflicting_task(2, 1).unwrap();
        let mut rc = RewardConfig::with_defaults(mode, 2);
        rc.conciseness_enabled = true;
        rc.mean_cr = 16.0;
        (task, model, rc)
    }

    #[test]
    fn zero_learning_rate_keeps_policy() {
        let (task, model, rc) = setup(ScalarizationMode::Hvo);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            iterations: 5,
            ..Default::default()
        };
        let run = train(&task, &model, &rc, &cfg).unwrap();
        assert_eq!(run.policy, initial_policy(&task, &cfg));
        let flat = TrainConfig {
            initial_skew: 0.0,
            ..cfg
        };
        assert_eq!(
            initial_policy(&task, &flat),
            PolicyParams::uniform(task.vocabulary_size)
        );
        assert_eq!(run.logs.len(), 5);
    }

    #[test]
    fn runs_are_deterministic() {
        let (task, model, rc) = setup(ScalarizationMode::Linear);
        let cfg = TrainConfig {
            iterations: 20,
            seed: 3,
            ..Default::default()
        };
        let a = train(&task, &model, &rc, &cfg).unwrap();
        let b = train(&task, &model, &rc, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_records_are_well_formed() {
        let (task, model, rc) = setup(ScalarizationMode::Hvo);
        let cfg = TrainConfig {
            iterations: 10,
            reference: ReferenceMode::Initial,
            ..Default::default()
        };
        let run = train(&task, &model, &rc, &cfg).unwrap();
        for (i, r) in run.logs.iter().enumerate() {
            assert_eq!(r.iteration, i);
            assert_eq!(r.per_dimension_group_mean.len(), 2);
            assert!(r.per_dimension_group_std.iter().all(|s| *s >= 0.0));
            assert!(r.kl_value >= 0.0);
        }
    }

    /// Scores that grow with the iteration count until linear rewards overflow.
    struct Exploding(Vec<String>, std::sync::atomic::AtomicUsize);

    impl RewardModel for Exploding {
        fn dimension_names(&self) -> &[String] {
            &self.0
        }

        fn evaluate(&self, task: &SurrogateTask, output: &[usize]) -> Result<ScoreVector> {
            let calls = self.1.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            let scale = if calls >= 8 * 3 { 1e300 } else { 1.0 };
            let base = crate::env::ClassFractionModel::new(2).evaluate(task, output)?;
            ScoreVector::new(
                base.iter()
                    .map(|v| v * scale + 1e-3 * calls as f64)
                    .collect(),
            )
        }
    }

    #[test]
    fn divergence_reports_partial_logs() {
        let (task, _, _) = setup(ScalarizationMode::Linear);
        let model = Exploding(vec!["a".into(), "b".into()], Default::default());
        let mut rc = RewardConfig::with_defaults(ScalarizationMode::Linear, 2);
        rc.weights = vec![1e10, 1e10];
        let cfg = TrainConfig {
            iterations: 10,
            ..Default::default()
        };
        let err = train(&task, &model, &rc, &cfg).unwrap_err();
        assert_eq!(
            err.source,
            HvoError::Diverged {
                iteration: 3,
                reason: "non-finite reward".into()
            }
        );
        assert_eq!(err.logs.len(), 3);
    }

    #[test]
    fn invalid_configs_rejected() {
        let (task, model, rc) = setup(ScalarizationMode::Hvo);
        let cfg = TrainConfig {
            group_size: 1,
            ..Default::default()
        };
        assert!(train(&task, &model, &rc, &cfg).is_err());
        let cfg = TrainConfig {
            clip_epsilon: 1.0,
            ..Default::default()
        };
        assert!(train(&task, &model, &rc, &cfg).is_err());
    }
}
