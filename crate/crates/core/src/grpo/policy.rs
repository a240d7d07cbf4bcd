use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::STOP_TOKEN;
use crate::error::{HvoError, Result};

/// Context row used for the first token of every sequence. The stop token
/// never precedes another token, so its row doubles as the start state.
pub const START_CONTEXT: usize = STOP_TOKEN;

/// Tabular bigram policy: one row of logits per previous token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    vocab: usize,
    context_order: usize,
    logits: Vec<f64>,
}

impl PolicyParams {
    /// All-zero logits, i.e. uniform next-token distributions.
    pub fn uniform(vocab: usize) -> Self {
        Self {
            vocab,
            context_order: 1,
            logits: vec![0.0; vocab * vocab],
        }
    }

    pub fn from_logits(vocab: usize, logits: Vec<f64>) -> Result<Self> {
        if vocab < 2 {
            return Err(HvoError::InvalidConfig(
                "vocabulary needs at least 2 tokens".into(),
            ));
        }
        if logits.len() != vocab * vocab {
            return Err(HvoError::DimensionMismatch {
                expected: vocab * vocab,
                actual: logits.len(),
            });
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(HvoError::NonFinite("policy logit".into()));
        }
        Ok(Self {
            vocab,
            context_order: 1,
            logits,
        })
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn contexts(&self) -> usize {
        self.vocab
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn row(&self, context: usize) -> &[f64] {
        &self.logits[context * self.vocab..(context + 1) * self.vocab]
    }

    pub fn row_mut(&mut self, context: usize) -> &mut [f64] {
        &mut self.logits[context * self.vocab..(context + 1) * self.vocab]
    }

    pub fn is_finite(&self) -> bool {
        self.logits.iter().all(|l| l.is_finite())
    }

    pub fn log_probs(&self, context: usize) -> Vec<f64> {
        log_softmax(self.row(context))
    }

    pub fn probs(&self, context: usize) -> Vec<f64> {
        self.log_probs(context).into_iter().map(f64::exp).collect()
    }

    pub fn log_prob(&self, context: usize, token: usize) -> f64 {
        self.log_probs(context)[token]
    }

    /// Samples one sequence, stopping at the stop token or `max_len` tokens.
    /// Returns the tokens together with their log-probabilities.
    pub fn sample_sequence<R: Rng>(&self, max_len: usize, rng: &mut R) -> (Vec<usize>, Vec<f64>) {
        let mut tokens = Vec::with_capacity(max_len);
        let mut logps = Vec::with_capacity(max_len);
        let mut context = START_CONTEXT;
        for _ in 0..max_len {
            let lp = self.log_probs(context);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut token = self.vocab - 1;
            for (t, l) in lp.iter().enumerate() {
                acc += l.exp();
                if u < acc {
                    token = t;
                    break;
                }
            }
            tokens.push(token);
            logps.push(lp[token]);
            if token == STOP_TOKEN {
                break;
            }
            context = token;
        }
        (tokens, logps)
    }
}

pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    row.iter().map(|x| x - lse).collect()
}

/// Context row that produced token `t` of `tokens`.
pub fn context_at(tokens: &[usize], t: usize) -> usize {
    if t == 0 {
        START_CONTEXT
    } else {
        tokens[t - 1]
    }
}

/// One sampled output of a group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    /// Sampled actions, including a terminating stop token if one was drawn.
    pub tokens: Vec<usize>,
    /// Log-probabilities of `tokens` under the sampling policy.
    pub old_log_probs: Vec<f64>,
    pub scores: Option<crate::metrics::ScoreVector>,
    pub reward: f64,
    pub advantage: f64,
}

impl GroupSample {
    pub fn new(tokens: Vec<usize>, old_log_probs: Vec<f64>) -> Self {
        Self {
            tokens,
            old_log_probs,
            scores: None,
            reward: 0.0,
            advantage: 0.0,
        }
    }

    /// Number of tokens before the stop token (the completion length).
    pub fn content_len(&self) -> usize {
        self.tokens
            .iter()
            .position(|&t| t == STOP_TOKEN)
            .unwrap_or(self.tokens.len())
    }
}

/// Deterministic RNG source for one sampling round. Each sample index gets
/// its own generator, so drawing samples in parallel does not change them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupRng {
    pub seed: u64,
    pub round: u64,
}

impl GroupRng {
    pub fn new(seed: u64, round: u64) -> Self {
        Self { seed, round }
    }

    pub fn for_sample(&self, index: usize) -> ChaCha8Rng {
        let mixed = splitmix64(self.seed ^ splitmix64(self.round ^ splitmix64(index as u64)));
        ChaCha8Rng::seed_from_u64(mixed)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Draws `group_size` sequences from `policy`.
pub fn sample_group(
    policy: &PolicyParams,
    max_len: usize,
    group_size: usize,
    rng: GroupRng,
) -> Result<Vec<GroupSample>> {
    if group_size < 2 {
        return Err(HvoError::GroupTooSmall {
            min: 2,
            actual: group_size,
        });
    }
    if max_len == 0 {
        return Err(HvoError::InvalidConfig(
            "max_output_length must be positive".into(),
        ));
    }
    Ok((0..group_size)
        .into_par_iter()
        .map(|i| {
            let (tokens, logps) = policy.sample_sequence(max_len, &mut rng.for_sample(i));
            GroupSample::new(tokens, logps)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_softmax_normalizes() {
        let lp = log_softmax(&[1.0, 2.0, -3.0, 0.5]);
        let total: f64 = lp.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shift_invariance_of_row() {
        let mut p =
            PolicyParams::from_logits(3, vec![0.1, 0.5, -0.2, 1.0, 0.0, 0.3, 0.2, 0.2, 0.2])
                .unwrap();
        let before = p.log_prob(1, 2);
        for l in p.row_mut(1) {
            *l += 3.0;
        }
        assert!((p.log_prob(1, 2) - before).abs() < 1e-14);
    }

    #[test]
    fn degenerate_policy_samples_identical_sequences() {
        let mut p = PolicyParams::uniform(4);
        for c in 0..4 {
            let row = p.row_mut(c);
            row.fill(0.0);
            row[(c % 3) + 1] = 50.0;
        }
        let group = sample_group(&p, 5, 6, GroupRng::new(1, 0)).unwrap();
        assert!(group.iter().all(|s| s.tokens == group[0].tokens));
        assert_eq!(group[0].tokens.len(), 5);
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = PolicyParams::uniform(5);
        let a = sample_group(&p, 8, 16, GroupRng::new(42, 3)).unwrap();
        let b = sample_group(&p, 8, 16, GroupRng::new(42, 3)).unwrap();
        assert_eq!(a, b);
        let c = sample_group(&p, 8, 16, GroupRng::new(42, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stored_log_probs_match_policy() {
        let p = PolicyParams::from_logits(3, (0..9).map(|i| i as f64 * 0.1).collect()).unwrap();
        for s in sample_group(&p, 6, 8, GroupRng::new(0, 0)).unwrap() {
            for (t, (&tok, &lp)) in s.tokens.iter().zip(&s.old_log_probs).enumerate() {
                assert_eq!(p.log_prob(context_at(&s.tokens, t), tok), lp);
            }
        }
    }

    #[test]
    fn group_size_must_be_at_least_two() {
        let p = PolicyParams::uniform(3);
        assert!(sample_group(&p, 4, 1, GroupRng::new(0, 0)).is_err());
    }
}
