//! Token-level clipped surrogate objective with a KL penalty, and its exact
//! gradient with respect to the logits of the policy being optimized.
//!
//! ```text
//! J = 1/G sum_i 1/|o_i| sum_t min(f_it A_i, clip(f_it, 1-eps, 1+eps) A_i) - beta KL
//! KL = mean over visited context rows c of sum_a ref(a|c) log(ref(a|c) / pi(a|c))
//! ```
//!
//! `f_it` is the ratio of the current to the sampling probability of token
//! `t`, and `A_i` the group-relative advantage shared by every token of `o_i`.

use std::collections::BTreeSet;

use crate::error::{HvoError, Result};
use crate::grpo::policy::{context_at, GroupSample, PolicyParams};
use crate::grpo::train::TrainConfig;

/// `pi_new(o_t | ctx) / pi_old(o_t | ctx)` using the log-probability stored
/// at sampling time for the denominator.
pub fn importance_ratio(policy: &PolicyParams, sample: &GroupSample, t: usize) -> Result<f64> {
    let old = *sample
        .old_log_probs
        .get(t)
        .ok_or(HvoError::DimensionMismatch {
            expected: sample.tokens.len(),
            actual: t,
        })?;
    let new = policy.log_prob(context_at(&sample.tokens, t), sample.tokens[t]);
    if !old.is_finite() || !new.is_finite() {
        return Err(HvoError::NonFinite("log-probability".into()));
    }
    Ok((new - old).exp())
}

fn check_inputs(
    policy: &PolicyParams,
    reference: &PolicyParams,
    samples: &[GroupSample],
    advantages: &[f64],
) -> Result<()> {
    if samples.is_empty() {
        return Err(HvoError::EmptyGroup);
    }
    if advantages.len() != samples.len() {
        return Err(HvoError::DimensionMismatch {
            expected: samples.len(),
            actual: advantages.len(),
        });
    }
    if reference.vocab() != policy.vocab() {
        return Err(HvoError::DimensionMismatch {
            expected: policy.vocab(),
            actual: reference.vocab(),
        });
    }
    for s in samples {
        if s.tokens.is_empty() {
            return Err(HvoError::EmptyOutput);
        }
        if s.tokens.len() != s.old_log_probs.len() {
            return Err(HvoError::DimensionMismatch {
                expected: s.tokens.len(),
                actual: s.old_log_probs.len(),
            });
        }
        if let Some(&token) = s.tokens.iter().find(|&&t| t >= policy.vocab()) {
            return Err(HvoError::TokenOutOfRange {
                token,
                vocab: policy.vocab(),
            });
        }
    }
    Ok(())
}

/// Distinct context rows visited by the group, in ascending order.
pub fn visited_contexts(samples: &[GroupSample]) -> BTreeSet<usize> {
    samples
        .iter()
        .flat_map(|s| (0..s.tokens.len()).map(move |t| context_at(&s.tokens, t)))
        .collect()
}

/// Exact `KL(reference || policy)` averaged over the context rows the group visited.
pub fn kl_penalty(policy: &PolicyParams, reference: &PolicyParams, samples: &[GroupSample]) -> f64 {
    let rows = visited_contexts(samples);
    if rows.is_empty() {
        return 0.0;
    }
    let total: f64 = rows.iter().map(|&c| row_kl(reference, policy, c)).sum();
    total / rows.len() as f64
}

fn row_kl(reference: &PolicyParams, policy: &PolicyParams, context: usize) -> f64 {
    let lp_ref = reference.log_probs(context);
    let lp = policy.log_probs(context);
    let kl: f64 = lp_ref.iter().zip(&lp).map(|(r, p)| r.exp() * (r - p)).sum();
    // Rounding can leave a tiny negative value when the rows coincide.
    kl.max(0.0)
}

struct TokenTerm {
    value: f64,
    /// Multiplier of `grad log pi(o_t)` when the unclipped branch is active.
    weight: Option<f64>,
}

fn token_term(ratio: f64, advantage: f64, clip_epsilon: f64) -> TokenTerm {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon) * advantage;
    if clipped < unclipped {
        TokenTerm {
            value: clipped,
            weight: None,
        }
    } else {
        TokenTerm {
            value: unclipped,
            weight: Some(unclipped),
        }
    }
}

/// Value of the clipped surrogate objective at `policy`.
pub fn surrogate_objective(
    policy: &PolicyParams,
    reference: &PolicyParams,
    samples: &[GroupSample],
    advantages: &[f64],
    cfg: &TrainConfig,
) -> Result<f64> {
    check_inputs(policy, reference, samples, advantages)?;
    let mut total = 0.0;
    for (s, &adv) in samples.iter().zip(advantages) {
        let mut seq = 0.0;
        for t in 0..s.tokens.len() {
            seq += token_term(importance_ratio(policy, s, t)?, adv, cfg.clip_epsilon).value;
        }
        total += seq / s.tokens.len() as f64;
    }
    let surrogate = total / samples.len() as f64;
    if cfg.kl_beta == 0.0 {
        return Ok(surrogate);
    }
    Ok(surrogate - cfg.kl_beta * kl_penalty(policy, reference, samples))
}

/// Gradient of [`surrogate_objective`] with respect to the logits of
/// `policy`, laid out like [`PolicyParams::logits`]. Tokens whose clipped
/// branch is selected contribute nothing.
pub fn objective_gradient(
    policy: &PolicyParams,
    reference: &PolicyParams,
    samples: &[GroupSample],
    advantages: &[f64],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    check_inputs(policy, reference, samples, advantages)?;
    let vocab = policy.vocab();
    let mut grad = vec![0.0; policy.logits().len()];
    let group = samples.len() as f64;
    for (s, &adv) in samples.iter().zip(advantages) {
        if adv == 0.0 {
            continue;
        }
        let scale = 1.0 / (group * s.tokens.len() as f64);
        for t in 0..s.tokens.len() {
            let ratio = importance_ratio(policy, s, t)?;
            let Some(weight) = token_term(ratio, adv, cfg.clip_epsilon).weight else {
                continue;
            };
            let ctx = context_at(&s.tokens, t);
            let probs = policy.probs(ctx);
            let row = &mut grad[ctx * vocab..(ctx + 1) * vocab];
            // d log pi(a|c) / d logit(b|c) = [a == b] - pi(b|c)
            for (b, g) in row.iter_mut().enumerate() {
                let indicator = if b == s.tokens[t] { 1.0 } else { 0.0 };
                *g += scale * weight * (indicator - probs[b]);
            }
        }
    }
    if cfg.kl_beta != 0.0 {
        let rows = visited_contexts(samples);
        let scale = cfg.kl_beta / rows.len() as f64;
        for c in rows {
            let p = policy.probs(c);
            let r = reference.probs(c);
            let row = &mut grad[c * vocab..(c + 1) * vocab];
            // d KL / d logit(b|c) = pi(b|c) - ref(b|c)
            for ((g, pb), rb) in row.iter_mut().zip(&p).zip(&r) {
                *g -= scale * (pb - rb);
            }
        }
    }
    Ok(grad)
}
