//! Data-parallel kernels against their sequential counterparts.
//!
//! With the default `parallel` feature each kernel runs on a one-thread pool
//! and on the full pool. `cargo bench --no-default-features` measures the
//! plain iterator fallback.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fpk::fields::{ForceField, HypothesisOptions, HypothesisReport, SampleSet, WeightContext};
use fpk::grid::{assemble_operator, Grid};
use fpk::inequalities::nash_check;
use fpk::splitting::{build_cutoff, dissipativity_fit, split, DissipativityOptions};

#[cfg(feature = "parallel")]
fn modes() -> Vec<(String, Option<rayon::ThreadPool>)> {
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![
        ("single-thread".into(), Some(one)),
        ("full-pool".into(), Some(all)),
    ]
}

#[cfg(not(feature = "parallel"))]
fn modes() -> Vec<(String, Option<()>)> {
    vec![("sequential".into(), None)]
}

#[cfg(feature = "parallel")]
fn within<R: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    pool.as_ref().expect("pool").install(f)
}

#[cfg(not(feature = "parallel"))]
fn within<R>(_: &Option<()>, f: impl FnOnce() -> R) -> R {
    f()
}

fn hypothesis_sweep(c: &mut Criterion) {
    let field = ForceField::gradient_power_plus_rotation(2, 1.5, 1.0).unwrap();
    let ctx = WeightContext::new(2.0, 2, 2.0).unwrap();
    let samples = SampleSet::standard(2);
    let mut group = c.benchmark_group("hypothesis_sweep_2d");
    group.sample_size(10);
    for (name, pool) in modes() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| {
                within(&pool, || {
                    HypothesisReport::compute(&field, &ctx, &samples, &HypothesisOptions::default())
                        .unwrap()
                })
            })
        });
    }
    group.finish();
}

fn assembly(c: &mut Criterion) {
    let grid = Grid::new(2, 8.0, 201).unwrap();
    let field = ForceField::gradient_power_plus_rotation(2, 1.5, 1.0).unwrap();
    let mut group = c.benchmark_group("assemble_201x201");
    group.sample_size(10);
    for (name, pool) in modes() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| {
                within(&pool, || {
                    black_box(assemble_operator(&grid, &field).unwrap())
                })
            })
        });
    }
    group.finish();
}

fn dissipativity_trials(c: &mut Criterion) {
    let grid = Grid::new(1, 8.0, 401).unwrap();
    let op = assemble_operator(&grid, &ForceField::linear(1, 1.0)).unwrap();
    let sp = split(&op, &build_cutoff(&grid, 2.0, 10.0).unwrap()).unwrap();
    let opts = DissipativityOptions {
        trials: 16,
        t_end: 5.0,
        dt: 0.05,
        ..Default::default()
    };
    let mut group = c.benchmark_group("dissipativity_16_trials");
    group.sample_size(10);
    for (name, pool) in modes() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| within(&pool, || dissipativity_fit(&sp, 2.0, &opts).unwrap()))
        });
    }
    group.finish();
}

fn nash_family(c: &mut Criterion) {
    let grid = Grid::new(2, 6.0, 81).unwrap();
    let ctx = WeightContext::new(2.0, 2, 2.0).unwrap();
    let mut group = c.benchmark_group("nash_family_256");
    group.sample_size(10);
    for (name, pool) in modes() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| within(&pool, || nash_check(&grid, &ctx, 256, (0.2, 2.0)).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    hypothesis_sweep,
    assembly,
    dissipativity_trials,
    nash_family
);
criterion_main!(benches);
