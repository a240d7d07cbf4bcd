//! Table-style evaluation summaries of a trained policy.

use serde::{Deserialize, Serialize};

use crate::env::{RewardModel, SurrogateTask};
use crate::error::{HvoError, Result};
use crate::grpo::policy::{GroupRng, PolicyParams};
use crate::grpo::train::score_group;
use crate::metrics::{
    dimension_std, hypervolume_indicator, overall_score, ReferencePoint, ScoreVector,
};

/// Hypervolume scores are reported in units of `1e-3`.
pub const HV_SCORE_UNIT: f64 = 1e-3;
pub const DEFAULT_EVAL_GROUP: usize = 256;
/// RNG round reserved for evaluation groups; training uses rounds `0..iterations`.
pub const EVAL_ROUND: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dimension_names: Vec<String>,
    pub per_dimension_means: Vec<f64>,
    pub overall: f64,
    /// Sample standard deviation across the per-dimension means; `None` for
    /// a single dimension.
    pub std: Option<f64>,
    /// Hypervolume of the evaluated points, in units of `1e-3`.
    pub hv_score: f64,
    /// Reference point used for `hv_score` (per-dimension minimum minus delta).
    pub hv_reference: Vec<f64>,
    pub mean_completion_length: f64,
    pub samples: usize,
}

impl EvalReport {
    pub fn from_scores(
        dimension_names: Vec<String>,
        scores: &[ScoreVector],
        lengths: &[usize],
        delta: f64,
    ) -> Result<Self> {
        let first = scores.first().ok_or(HvoError::EmptyGroup)?;
        let dims = first.len();
        if dimension_names.len() != dims {
            return Err(HvoError::DimensionMismatch {
                expected: dims,
                actual: dimension_names.len(),
            });
        }
        if lengths.len() != scores.len() {
            return Err(HvoError::DimensionMismatch {
                expected: scores.len(),
                actual: lengths.len(),
            });
        }
        let n = scores.len() as f64;
        let mut means = vec![0.0; dims];
        for s in scores {
            if s.len() != dims {
                return Err(HvoError::DimensionMismatch {
                    expected: dims,
                    actual: s.len(),
                });
            }
            for (m, v) in means.iter_mut().zip(s.iter()) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let reference = ReferencePoint::nadir_offset(scores, delta)?;
        let hv = hypervolume_indicator(scores, reference.values())?;
        Ok(Self {
            dimension_names,
            overall: overall_score(&means)?,
            std: (dims >= 2).then(|| dimension_std(&means)).transpose()?,
            per_dimension_means: means,
            hv_score: hv / HV_SCORE_UNIT,
            hv_reference: reference.values().to_vec(),
            mean_completion_length: lengths.iter().sum::<usize>() as f64 / n,
            samples: scores.len(),
        })
    }
}

/// Samples `n` outputs from `policy` and scores them. Returns the score
/// vectors and completion lengths.
pub fn evaluation_group(
    policy: &PolicyParams,
    task: &SurrogateTask,
    model: &dyn RewardModel,
    n: usize,
    max_len: usize,
    seed: u64,
) -> Result<(Vec<ScoreVector>, Vec<usize>)> {
    let samples =
        crate::grpo::policy::sample_group(policy, max_len, n, GroupRng::new(seed, EVAL_ROUND))?;
    let scores = score_group(task, model, &samples)?;
    Ok((scores, samples.iter().map(|s| s.content_len()).collect()))
}

pub fn evaluate_policy(
    policy: &PolicyParams,
    task: &SurrogateTask,
    model: &dyn RewardModel,
    n: usize,
    max_len: usize,
    seed: u64,
    delta: f64,
) -> Result<EvalReport> {
    let (scores, lengths) = evaluation_group(policy, task, model, n, max_len, seed)?;
    EvalReport::from_scores(model.dimension_names().to_vec(), &scores, &lengths, delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_from_fixed_scores() {
        let scores: Vec<ScoreVector> = [[0.5, 0.8], [0.7, 0.6]]
            .iter()
            .map(|r| ScoreVector::new(r.to_vec()).unwrap())
            .collect();
        let r =
            EvalReport::from_scores(vec!["a".into(), "b".into()], &scores, &[3, 5], 0.1).unwrap();
        assert!((r.per_dimension_means[0] - 0.6).abs() < 1e-12);
        assert!((r.overall - 0.65).abs() < 1e-12);
        assert!((r.std.unwrap() - (0.005f64).sqrt()).abs() < 1e-12);
        // boxes from (0.4, 0.5): 0.1*0.3 + 0.3*0.1 - 0.1*0.1
        assert!((r.hv_score - 50.0).abs() < 1e-9);
        assert_eq!(r.mean_completion_length, 4.0);
    }
}
