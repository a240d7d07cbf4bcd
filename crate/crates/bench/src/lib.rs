//! Deterministic inputs shared by the benchmarks.

use hvo_core::grpo::{sample_group, GroupRng, GroupSample, PolicyParams};
use hvo_core::{group_advantages, ScoreMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` points with `dims` coordinates drawn uniformly from `[0, 1)`.
pub fn random_points(n: usize, dims: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dims).map(|_| rng.random()).collect())
        .collect()
}

/// `n` points on the positive part of the unit sphere, so none dominates another.
pub fn front_points(n: usize, dims: usize, seed: u64) -> Vec<Vec<f64>> {
    random_points(n, dims, seed)
        .into_iter()
        .map(|p| {
            let norm = p
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            p.into_iter().map(|x| x / norm).collect()
        })
        .collect()
}

pub fn score_matrix(group: usize, dims: usize, seed: u64) -> ScoreMatrix {
    ScoreMatrix::from_rows(random_points(group, dims, seed)).expect("finite scores")
}

/// A policy, a reference policy, a sampled group and its advantages.
pub struct GradientFixture {
    pub policy: PolicyParams,
    pub reference: PolicyParams,
    pub samples: Vec<GroupSample>,
    pub advantages: Vec<f64>,
}

pub fn gradient_fixture(vocab: usize, group: usize, max_len: usize, seed: u64) -> GradientFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logits = |rng: &mut ChaCha8Rng| {
        (0..vocab * vocab)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect()
    };
    let old = PolicyParams::from_logits(vocab, logits(&mut rng)).expect("finite logits");
    let reference = PolicyParams::from_logits(vocab, logits(&mut rng)).expect("finite logits");
    let samples = sample_group(&old, max_len, group, GroupRng::new(seed, 0)).expect("valid group");
    let rewards: Vec<f64> = (0..group).map(|_| rng.random()).collect();
    let advantages = group_advantages(&rewards).expect("valid rewards");
    let policy = PolicyParams::from_logits(
        vocab,
        old.logits()
            .iter()
            .map(|l| l + rng.random_range(-0.1..0.1))
            .collect(),
    )
    .expect("finite logits");
    GradientFixture {
        policy,
        reference,
        samples,
        advantages,
    }
}
