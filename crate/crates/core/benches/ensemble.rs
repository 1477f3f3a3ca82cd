//! Training, inference and prediction on a one-worker pool against the full
//! pool. Build with `--no-default-features` to time the sequential fallback.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use minipatch::conformal::{loo_residuals, predict_batch};
use minipatch::loco::{infer_all, InferenceOptions};
use minipatch::simgen::{generate, SimModel, SimSpec};
use minipatch::{par, train_ensemble, MPConfig, Task};

fn pools() -> Vec<(&'static str, usize)> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut p = vec![("1-thread", 1)];
    if all > 1 {
        p.push(("all-threads", all));
    }
    p
}

fn bench_ensemble(c: &mut Criterion) {
    let ds = generate(&SimSpec::new(SimModel::Linear, Task::Regression, 500, 50).with_snr(5.0)).unwrap();
    let cfg = MPConfig { k: 2_000, ..MPConfig::default() };
    let ens = train_ensemble(ds.clone(), &cfg).unwrap();
    let res = loo_residuals(&ens).unwrap();
    let x_new = generate(&SimSpec::new(SimModel::Linear, Task::Regression, 50, 50).with_seed(1)).unwrap().x;
    let opts = InferenceOptions::from_ensemble(&ens);

    let mut group = c.benchmark_group("minipatch");
    group.sample_size(10);
    for (label, threads) in pools() {
        group.bench_function(BenchmarkId::new("train", label), |b| {
            b.iter(|| par::with_threads(threads, || train_ensemble(black_box(ds.clone()), &cfg).unwrap()))
        });
        group.bench_function(BenchmarkId::new("infer_all", label), |b| {
            b.iter(|| par::with_threads(threads, || infer_all(black_box(&ens), &opts).unwrap()))
        });
        group.bench_function(BenchmarkId::new("predict_50", label), |b| {
            b.iter(|| par::with_threads(threads, || predict_batch(&ens, &res, black_box(x_new.view()), 0.1).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_ensemble);
criterion_main!(benches);
