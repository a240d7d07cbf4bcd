//! JSON experiment configuration.

use std::path::Path;

use hvo_core::env::{
    make_conflicting_task_with, ClassFractionModel, DEFAULT_DOCUMENT_LENGTH,
    DEFAULT_TOKENS_PER_CLASS,
};
use hvo_core::reward::{default_weights, ConcisenessComposition};
use hvo_core::{RewardConfig, ScalarizationMode, SurrogateTask, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Reward settings as written in a config file. `weights` may be omitted, in
/// which case every dimension gets `+1` (linear) or `-1` (HVO).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSection {
    pub mode: ScalarizationMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub hvo_delta: f64,
    pub hvo_epsilon: f64,
    pub conciseness_enabled: bool,
    pub composition: ConcisenessComposition,
    pub rho: f64,
    pub lambda_steepness: f64,
    pub mean_cr: f64,
}

impl Default for RewardSection {
    fn default() -> Self {
        Self {
            mode: ScalarizationMode::Hvo,
            weights: None,
            hvo_delta: RewardConfig::DEFAULT_DELTA,
            hvo_epsilon: RewardConfig::DEFAULT_EPSILON,
            conciseness_enabled: true,
            composition: ConcisenessComposition::AppendDimension,
            rho: RewardConfig::DEFAULT_RHO,
            lambda_steepness: RewardConfig::DEFAULT_LAMBDA,
            mean_cr: 16.0,
        }
    }
}

impl RewardSection {
    /// Reward config for `dims` score dimensions, optionally overriding the mode.
    pub fn resolve(&self, dims: usize, mode: Option<ScalarizationMode>) -> CliResult<RewardConfig> {
        let mode = mode.unwrap_or(self.mode);
        let cfg = RewardConfig {
            mode,
            weights: self
                .weights
                .clone()
                .unwrap_or_else(|| default_weights(mode, dims)),
            hvo_delta: self.hvo_delta,
            hvo_epsilon: self.hvo_epsilon,
            conciseness_enabled: self.conciseness_enabled,
            composition: self.composition,
            rho: self.rho,
            lambda_steepness: self.lambda_steepness,
            mean_cr: self.mean_cr,
        };
        cfg.validate(dims)
            .map_err(|e| CliError::Input(format!("config: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSpec {
    pub dimensions: usize,
    /// Defaults to `1 + 3 * dimensions`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocab_size: Option<usize>,
    pub document_length: usize,
    pub seed: u64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            dimensions: 2,
            vocab_size: None,
            document_length: DEFAULT_DOCUMENT_LENGTH,
            seed: 0,
        }
    }
}

impl TaskSpec {
    pub fn build(&self) -> CliResult<(SurrogateTask, ClassFractionModel)> {
        let vocab = self
            .vocab_size
            .unwrap_or(1 + DEFAULT_TOKENS_PER_CLASS * self.dimensions);
        make_conflicting_task_with(self.dimensions, vocab, self.document_length, self.seed)
            .map_err(|e| CliError::Input(format!("config: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub reward: RewardSection,
    pub train: TrainConfig,
    pub task: TaskSpec,
    /// One training run per seed; overrides `train.seed`.
    pub seeds: Vec<u64>,
    pub eval_group_size: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            reward: RewardSection::default(),
            train: TrainConfig::default(),
            task: TaskSpec::default(),
            seeds: vec![0],
            eval_group_size: hvo_core::report::DEFAULT_EVAL_GROUP,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| CliError::Input(format!("config: line {}: {e}", e.line())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.seeds.is_empty() {
            return Err(CliError::Input("config: seeds must not be empty".into()));
        }
        if self.eval_group_size < 2 {
            return Err(CliError::Input(
                "config: eval_group_size must be at least 2".into(),
            ));
        }
        self.train
            .validate()
            .map_err(|e| CliError::Input(format!("config: {e}")))?;
        self.task.build()?;
        self.reward.resolve(self.task.dimensions, None)?;
        Ok(())
    }
}
