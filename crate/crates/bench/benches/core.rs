use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use jdag_bench::{dataset, weights};
use jdag_core::{
    acyclicity_gradient, fit_joint, matrix_exponential, smooth_objective, PenaltyParams,
    SolverConfig,
};

fn expm(c: &mut Criterion) {
    let mut group = c.benchmark_group("matrix_exponential");
    for d in [10, 20, 50, 100] {
        let w = weights(1, d);
        let a = w.get(0).as_matrix().component_mul(w.get(0).as_matrix());
        group.bench_with_input(BenchmarkId::from_parameter(d), &a, |b, a| {
            b.iter(|| matrix_exponential(black_box(a)).unwrap())
        });
    }
    group.finish();
}

fn acyclicity(c: &mut Criterion) {
    let mut group = c.benchmark_group("acyclicity_gradient");
    for d in [20, 50, 100] {
        let w = weights(1, d);
        group.bench_with_input(
            BenchmarkId::from_parameter(d),
            w.get(0).as_matrix(),
            |b, m| b.iter(|| acyclicity_gradient(black_box(m)).unwrap()),
        );
    }
    group.finish();
}

fn objective(c: &mut Criterion) {
    let mut group = c.benchmark_group("smooth_objective");
    let p = PenaltyParams::new(0.1, 0.1);
    for d in [20, 50] {
        let data = dataset(2, d, 200, 1);
        let w = weights(2, d);
        group.bench_with_input(
            BenchmarkId::from_parameter(d),
            &(data, w),
            |b, (data, w)| {
                b.iter(|| smooth_objective(black_box(w), data, &p, 1.0, &[0.0, 0.0]).unwrap())
            },
        );
    }
    group.finish();
}

fn fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_joint");
    group.sample_size(10);
    let cfg = SolverConfig {
        penalty: PenaltyParams::new(0.03, 0.01),
        ..SolverConfig::default()
    };
    for d in [10, 20] {
        let data = dataset(2, d, 200, 2);
        group.bench_with_input(BenchmarkId::from_parameter(d), &data, |b, data| {
            b.iter(|| fit_joint(black_box(data), &cfg, 0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, expm, acyclicity, objective, fit);
criterion_main!(benches);
