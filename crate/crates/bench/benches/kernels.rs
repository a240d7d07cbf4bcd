use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hvo_bench::{front_points, gradient_fixture, score_matrix};
use hvo_core::env::make_conflicting_task;
use hvo_core::grpo::{objective_gradient, train};
use hvo_core::{
    hvo_scalarize, hypervolume_indicator, RewardConfig, ScalarizationMode, TrainConfig,
};

fn hypervolume(c: &mut Criterion) {
    let mut group = c.benchmark_group("hypervolume");
    for (dims, n) in [(2, 256), (3, 64), (4, 32), (6, 16)] {
        let points = front_points(n, dims, 1);
        let reference = vec![0.0; dims];
        group.bench_with_input(BenchmarkId::new(format!("{dims}d"), n), &points, |b, p| {
            b.iter(|| hypervolume_indicator(black_box(p), &reference).unwrap())
        });
    }
    group.finish();
}

fn scalarize(c: &mut Criterion) {
    let mut group = c.benchmark_group("hvo_scalarize");
    for (g, dims) in [(8, 2), (8, 4), (64, 4)] {
        let scores = score_matrix(g, dims, 2);
        let cfg = RewardConfig::with_defaults(ScalarizationMode::Hvo, dims);
        group.bench_with_input(BenchmarkId::new(format!("G{g}"), dims), &scores, |b, s| {
            b.iter(|| hvo_scalarize(black_box(s), &cfg).unwrap())
        });
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let f = gradient_fixture(7, 8, 8, 3);
    let cfg = TrainConfig::default();
    c.bench_function("objective_gradient/V7_G8", |b| {
        b.iter(|| {
            objective_gradient(
                black_box(&f.policy),
                &f.reference,
                &f.samples,
                &f.advantages,
                &cfg,
            )
            .unwrap()
        })
    });
}

fn training(c: &mut Criterion) {
    let (task, model) = make_conflicting_task(2, 0).unwrap();
    let rc = RewardConfig::with_defaults(ScalarizationMode::Hvo, 2);
    let cfg = TrainConfig {
        iterations: 50,
        ..Default::default()
    };
    c.bench_function("train/M2_G8_50it", |b| {
        b.iter(|| train(&task, &model, &rc, black_box(&cfg)).unwrap())
    });
}

criterion_group!(benches, hypervolume, scalarize, gradient, training);
criterion_main!(benches);
