//! Reward-model interface and synthetic tasks with conflicting objectives.
//!
//! The built-in task partitions the non-stop vocabulary into `M` token
//! classes. Dimension `k` scores the fraction of an output's tokens drawn
//! from class `k`, so the scores of any output sum to at most one and the
//! Pareto front is the simplex face `sum_k s_k = 1`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HvoError, Result};
use crate::metrics::ScoreVector;

/// Token index reserved for end-of-sequence.
pub const STOP_TOKEN: usize = 0;
pub const MIN_CONFLICT_DIMS: usize = 2;
pub const MAX_CONFLICT_DIMS: usize = 6;
pub const DEFAULT_TOKENS_PER_CLASS: usize = 3;
pub const DEFAULT_DOCUMENT_LENGTH: usize = 64;

/// Multi-dimensional judge of an output. Implementations are immutable and
/// must return the same scores for the same `(task, output)`.
pub trait RewardModel: Send + Sync {
    fn dimension_names(&self) -> &[String];

    fn dimension_count(&self) -> usize {
        self.dimension_names().len()
    }

    fn evaluate(&self, task: &SurrogateTask, output: &[usize]) -> Result<ScoreVector>;
}

/// How output tokens map to score dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    /// `token_class[t]` is the dimension token `t` counts towards; `None`
    /// for the stop token.
    pub token_class: Vec<Option<usize>>,
    pub classes: usize,
}

/// A prompt stand-in: a document of known length and a vocabulary the policy
/// writes its output in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurrogateTask {
    pub task_id: String,
    pub document_length: usize,
    pub vocabulary_size: usize,
    pub feature_spec: FeatureSpec,
}

impl SurrogateTask {
    pub fn check_output(&self, output: &[usize]) -> Result<()> {
        if output.is_empty() {
            return Err(HvoError::EmptyOutput);
        }
        if let Some(&token) = output.iter().find(|&&t| t >= self.vocabulary_size) {
            return Err(HvoError::TokenOutOfRange {
                token,
                vocab: self.vocabulary_size,
            });
        }
        Ok(())
    }

    /// Tokens before the first stop token.
    pub fn content<'a>(&self, output: &'a [usize]) -> &'a [usize] {
        let end = output
            .iter()
            .position(|&t| t == STOP_TOKEN)
            .unwrap_or(output.len());
        &output[..end]
    }

    /// Tokens of class `k`, in ascending order.
    pub fn class_tokens(&self, k: usize) -> Vec<usize> {
        self.feature_spec
            .token_class
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == Some(k))
            .map(|(t, _)| t)
            .collect()
    }
}

/// Scores each dimension by the fraction of content tokens in its class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassFractionModel {
    names: Vec<String>,
}

impl ClassFractionModel {
    pub fn new(classes: usize) -> Self {
        Self {
            names: (1..=classes).map(|k| format!("dim_{k}")).collect(),
        }
    }
}

impl RewardModel for ClassFractionModel {
    fn dimension_names(&self) -> &[String] {
        &self.names
    }

    fn evaluate(&self, task: &SurrogateTask, output: &[usize]) -> Result<ScoreVector> {
        task.check_output(output)?;
        let m = self.names.len();
        if task.feature_spec.classes != m {
            return Err(HvoError::DimensionMismatch {
                expected: m,
                actual: task.feature_spec.classes,
            });
        }
        let content = task.content(output);
        let mut counts = vec![0usize; m];
        for &t in content {
            if let Some(k) = task.feature_spec.token_class[t] {
                counts[k] += 1;
            }
        }
        let n = content.len().max(1) as f64;
        ScoreVector::new(counts.into_iter().map(|c| c as f64 / n).collect())
    }
}

/// Conflicting class-fraction task over `1 + 3M` tokens; `seed` fixes the
/// class partition.
pub fn make_conflicting_task(
    dims: usize,
    seed: u64,
) -> Result<(SurrogateTask, ClassFractionModel)> {
    make_conflicting_task_with(
        dims,
        1 + DEFAULT_TOKENS_PER_CLASS * dims,
        DEFAULT_DOCUMENT_LENGTH,
        seed,
    )
}

pub fn make_conflicting_task_with(
    dims: usize,
    vocabulary_size: usize,
    document_length: usize,
    seed: u64,
) -> Result<(SurrogateTask, ClassFractionModel)> {
    if !(MIN_CONFLICT_DIMS..=MAX_CONFLICT_DIMS).contains(&dims) {
        return Err(HvoError::InvalidConfig(format!(
            "conflicting task needs {MIN_CONFLICT_DIMS}..={MAX_CONFLICT_DIMS} dimensions, got {dims}"
        )));
    }
    if vocabulary_size < 2 || vocabulary_size - 1 < dims {
        return Err(HvoError::InvalidConfig(format!(
            "vocabulary of {vocabulary_size} tokens cannot hold {dims} classes"
        )));
    }
    if document_length == 0 {
        return Err(HvoError::InvalidConfig(
            "document length must be positive".into(),
        ));
    }
    let mut tokens: Vec<usize> = (1..vocabulary_size).collect();
    tokens.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut token_class = vec![None; vocabulary_size];
    for (j, &t) in tokens.iter().enumerate() {
        token_class[t] = Some(j % dims);
    }
    let task = SurrogateTask {
        task_id: format!("conflict-m{dims}-v{vocabulary_size}-s{seed}"),
        document_length,
        vocabulary_size,
        feature_spec: FeatureSpec {
            token_class,
            classes: dims,
        },
    };
    Ok((task, ClassFractionModel::new(dims)))
}
