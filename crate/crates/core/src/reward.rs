//! Scalar rewards from multi-dimensional scores.
//!
//! Two scalarizers are provided. The weighted-linear one sums `w_k * r_k`.
//! The hypervolume one (HVO) gives every sample of a group the volume of its
//! box measured from a reference point sitting `delta` below the group
//! minimum of each dimension:
//!
//! ```text
//! r_i = prod_k min(epsilon, r_i^k - min_j r_j^k + delta) ^ (-w_k)
//! ```
//!
//! With `w_k = -1` the exponent is one and `r_i` is exactly that box volume,
//! with each edge capped at `epsilon`. A length-constraint reward and the
//! group-relative advantage normalization live here as well.

use serde::{Deserialize, Serialize};

use crate::error::{HvoError, Result};
use crate::metrics::ScoreVector;

/// Groups whose reward spread falls below this get all-zero advantages.
pub const ADVANTAGE_STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScalarizationMode {
    Linear,
    #[default]
    Hvo,
}

impl std::str::FromStr for ScalarizationMode {
    type Err = HvoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "hvo" => Ok(Self::Hvo),
            other => Err(HvoError::InvalidConfig(format!("unknown mode '{other}'"))),
        }
    }
}

/// How the conciseness score joins the multi-dimensional reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConcisenessComposition {
    /// Extra reward dimension (weight `1` in linear mode, `-1` in HVO mode).
    #[default]
    AppendDimension,
    /// Multiplies the scalarized reward.
    MultiplyAfter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub mode: ScalarizationMode,
    pub weights: Vec<f64>,
    pub hvo_delta: f64,
    pub hvo_epsilon: f64,
    pub conciseness_enabled: bool,
    #[serde(default)]
    pub composition: ConcisenessComposition,
    pub rho: f64,
    pub lambda_steepness: f64,
    pub mean_cr: f64,
}

impl RewardConfig {
    pub const DEFAULT_DELTA: f64 = 0.1;
    pub const DEFAULT_EPSILON: f64 = 0.99;
    pub const DEFAULT_RHO: f64 = 16.0;
    pub const DEFAULT_LAMBDA: f64 = 2.0;

    /// Defaults for `dims` dimensions: unit weights (negative in HVO mode),
    /// `delta = 0.1`, `epsilon = 0.99`, `rho = 16`, `lambda = 2`.
    pub fn with_defaults(mode: ScalarizationMode, dims: usize) -> Self {
        Self {
            mode,
            weights: default_weights(mode, dims),
            hvo_delta: Self::DEFAULT_DELTA,
            hvo_epsilon: Self::DEFAULT_EPSILON,
            conciseness_enabled: false,
            composition: ConcisenessComposition::AppendDimension,
            rho: Self::DEFAULT_RHO,
            lambda_steepness: Self::DEFAULT_LAMBDA,
            mean_cr: 1.0,
        }
    }

    pub fn validate(&self, dims: usize) -> Result<()> {
        if self.weights.len() != dims {
            return Err(HvoError::DimensionMismatch {
                expected: dims,
                actual: self.weights.len(),
            });
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(HvoError::InvalidConfig("non-finite weight".into()));
        }
        if self.mode == ScalarizationMode::Hvo {
            self.validate_hvo_params()?;
            if let Some(w) = self.weights.iter().find(|w| **w >= 0.0) {
                return Err(HvoError::InvalidConfig(format!(
                    "HVO weights must be negative, got {w}"
                )));
            }
        }
        if self.conciseness_enabled {
            if !(self.rho > 0.0 && self.rho.is_finite()) {
                return Err(HvoError::InvalidConfig("rho must be positive".into()));
            }
            if !(self.lambda_steepness > 0.0 && self.lambda_steepness.is_finite()) {
                return Err(HvoError::InvalidConfig("lambda must be positive".into()));
            }
            if !(self.mean_cr > 0.0 && self.mean_cr.is_finite()) {
                return Err(HvoError::InvalidConfig("mean_cr must be positive".into()));
            }
        }
        Ok(())
    }

    fn validate_hvo_params(&self) -> Result<()> {
        let (d, e) = (self.hvo_delta, self.hvo_epsilon);
        if !(d > 0.0 && d < 1.0 && e > 0.0 && e < 1.0) {
            return Err(HvoError::InvalidConfig(format!(
                "delta and epsilon must lie in (0,1), got delta={d} epsilon={e}"
            )));
        }
        if d >= e {
            return Err(HvoError::InvalidConfig(format!(
                "delta ({d}) must be smaller than epsilon ({e})"
            )));
        }
        Ok(())
    }
}

/// `+1` per dimension for linear mode, `-1` for HVO.
pub fn default_weights(mode: ScalarizationMode, dims: usize) -> Vec<f64> {
    let w = match mode {
        ScalarizationMode::Linear => 1.0,
        ScalarizationMode::Hvo => -1.0,
    };
    vec![w; dims]
}

/// Score vectors of one sampled group, all of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: Vec<ScoreVector>,
    dims: usize,
}

impl ScoreMatrix {
    pub fn new(rows: Vec<ScoreVector>) -> Result<Self> {
        let dims = rows.first().ok_or(HvoError::EmptyGroup)?.len();
        if let Some(r) = rows.iter().find(|r| r.len() != dims) {
            return Err(HvoError::DimensionMismatch {
                expected: dims,
                actual: r.len(),
            });
        }
        Ok(Self { rows, dims })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            rows.into_iter()
                .map(ScoreVector::new)
                .collect::<Result<_>>()?,
        )
    }

    pub fn rows(&self) -> &[ScoreVector] {
        &self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn group_size(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, k: usize) -> impl Iterator<Item = f64> + Clone + '_ {
        self.rows.iter().map(move |r| r[k])
    }

    pub fn column_min(&self, k: usize) -> f64 {
        self.column(k).fold(f64::INFINITY, f64::min)
    }

    /// Copy with `extra[i]` appended to row `i`.
    fn with_extra_column(&self, extra: &[f64]) -> Result<Self> {
        if extra.len() != self.rows.len() {
            return Err(HvoError::DimensionMismatch {
                expected: self.rows.len(),
                actual: extra.len(),
            });
        }
        let rows = self
            .rows
            .iter()
            .zip(extra)
            .map(|(r, &c)| {
                let mut v = r.values().to_vec();
                v.push(c);
                ScoreVector::new(v)
            })
            .collect::<Result<_>>()?;
        Self::new(rows)
    }
}

/// `r_i = sum_k w_k * r_i^k`.
pub fn linear_scalarize(scores: &ScoreMatrix, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != scores.dims() {
        return Err(HvoError::DimensionMismatch {
            expected: scores.dims(),
            actual: weights.len(),
        });
    }
    Ok(scores
        .rows()
        .iter()
        .map(|r| r.iter().zip(weights).map(|(s, w)| w * s).sum())
        .collect())
}

/// HVO scalarization with the weights, `delta` and `epsilon` of `cfg`.
pub fn hvo_scalarize(scores: &ScoreMatrix, cfg: &RewardConfig) -> Result<Vec<f64>> {
    cfg.validate_hvo_params()?;
    hvo_scalarize_with(scores, &cfg.weights, cfg.hvo_delta, cfg.hvo_epsilon)
}

pub fn hvo_scalarize_with(
    scores: &ScoreMatrix,
    weights: &[f64],
    delta: f64,
    epsilon: f64,
) -> Result<Vec<f64>> {
    if weights.len() != scores.dims() {
        return Err(HvoError::DimensionMismatch {
            expected: scores.dims(),
            actual: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| w.is_nan() || **w >= 0.0) {
        return Err(HvoError::InvalidConfig(format!(
            "HVO weights must be negative, got {w}"
        )));
    }
    let minima: Vec<f64> = (0..scores.dims()).map(|k| scores.column_min(k)).collect();
    Ok(scores
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .zip(&minima)
                .zip(weights)
                .map(|((&s, &lo), &w)| {
                    let edge = epsilon.min(s - lo + delta);
                    if w == -1.0 {
                        edge
                    } else {
                        edge.powf(-w)
                    }
                })
                .product()
        })
        .collect())
}

/// Length-constraint reward `1 / (1 + (x / rho)^lambda)` where `x` is the
/// absolute deviation of `doc_len / out_len` from `cfg.mean_cr`.
pub fn conciseness_reward(doc_len: usize, out_len: usize, cfg: &RewardConfig) -> Result<f64> {
    if out_len == 0 {
        return Err(HvoError::EmptyOutput);
    }
    if doc_len == 0 {
        return Err(HvoError::InvalidConfig(
            "document length must be positive".into(),
        ));
    }
    if cfg.rho.is_nan()
        || cfg.rho <= 0.0
        || cfg.lambda_steepness.is_nan()
        || cfg.lambda_steepness <= 0.0
    {
        return Err(HvoError::InvalidConfig(
            "rho and lambda must be positive".into(),
        ));
    }
    let x = (doc_len as f64 / out_len as f64 - cfg.mean_cr).abs();
    Ok(1.0 / (1.0 + (x / cfg.rho).powf(cfg.lambda_steepness)))
}

/// Mean compression ratio `doc_len / summary_len` over a reference corpus.
pub fn corpus_mean_cr(pairs: &[(usize, usize)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(HvoError::EmptyGroup);
    }
    let mut total = 0.0;
    for &(doc, summary) in pairs {
        if summary == 0 {
            return Err(HvoError::EmptyOutput);
        }
        if doc == 0 {
            return Err(HvoError::InvalidConfig(
                "document length must be positive".into(),
            ));
        }
        total += doc as f64 / summary as f64;
    }
    Ok(total / pairs.len() as f64)
}

/// `(r_i - mean) / std` with the population standard deviation. Groups with
/// `std < 1e-8` carry no signal and get all zeros.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(HvoError::GroupTooSmall {
            min: 2,
            actual: rewards.len(),
        });
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(HvoError::NonFinite("reward".into()));
    }
    // Corrected two-pass centering: the rounded mean can be off by half an ulp
    // of the reward magnitude, which matters when the spread is tiny relative
    // to the offset. The residual correction is applied in residual space.
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let residuals: Vec<f64> = rewards.iter().map(|r| r - mean).collect();
    let correction = residuals.iter().sum::<f64>() / n;
    let centered: Vec<f64> = residuals.iter().map(|d| d - correction).collect();
    let std = (centered.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    if std < ADVANTAGE_STD_FLOOR {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(centered.iter().map(|e| e / std).collect())
}

/// Scalar rewards for a group, folding in the conciseness score when enabled.
///
/// `lengths[i]` is `(doc_len, out_len)` for sample `i`.
pub fn compose_rewards(
    scores: &ScoreMatrix,
    lengths: &[(usize, usize)],
    cfg: &RewardConfig,
) -> Result<Vec<f64>> {
    cfg.validate(scores.dims())?;
    let scalarize = |m: &ScoreMatrix, weights: &[f64]| match cfg.mode {
        ScalarizationMode::Linear => linear_scalarize(m, weights),
        ScalarizationMode::Hvo => hvo_scalarize_with(m, weights, cfg.hvo_delta, cfg.hvo_epsilon),
    };
    if !cfg.conciseness_enabled {
        return scalarize(scores, &cfg.weights);
    }
    let concise = lengths
        .iter()
        .map(|&(doc, out)| conciseness_reward(doc, out, cfg))
        .collect::<Result<Vec<_>>>()?;
    match cfg.composition {
        ConcisenessComposition::AppendDimension => {
            let extended = scores.with_extra_column(&concise)?;
            let mut weights = cfg.weights.clone();
            weights.push(default_weights(cfg.mode, 1)[0]);
            scalarize(&extended, &weights)
        }
        ConcisenessComposition::MultiplyAfter => {
            if concise.len() != scores.group_size() {
                return Err(HvoError::DimensionMismatch {
                    expected: scores.group_size(),
                    actual: concise.len(),
                });
            }
            let base = scalarize(scores, &cfg.weights)?;
            Ok(base.iter().zip(&concise).map(|(r, c)| r * c).collect())
        }
    }
}
