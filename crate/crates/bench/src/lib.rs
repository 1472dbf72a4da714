//! Benchmarks of the ES iteration and the estimators' inner loops.

use std::hint::black_box;

use criterion::{BenchmarkId, Criterion};

use eslr_core::chain::{chain_step, ChainState};
use eslr_core::condition::{csa1_statistic, order_stat_m2};
use eslr_core::es::{step, AlgorithmConfig, EsState, StepSizeRule};
use eslr_core::objectives::{ellipsoid, sphere};
use eslr_core::quadrature::QuadratureSpec;
use eslr_core::rng::seeded;

pub fn benchmarks(c: &mut Criterion) {
    es_step(c);
    chain(c);
    condition(c);
}

fn es_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for n in [10, 100] {
        let lambda = 4 + (3.0 * (n as f64).ln()) as usize;
        let cfg = AlgorithmConfig::equal_weights(n, lambda, lambda / 2, StepSizeRule::Csa1).unwrap();
        let f = sphere(n);
        let state = EsState::new(vec![1.0; n], 1.0).unwrap();
        let mut g = seeded(0);
        group.bench_function(BenchmarkId::new("sphere_csa1", n), |b| {
            b.iter(|| step(black_box(&state), &f, &cfg, &mut g).unwrap())
        });
    }
    group.finish();
}

fn chain(c: &mut Criterion) {
    let cfg = AlgorithmConfig::equal_weights(10, 11, 3, StepSizeRule::Xnes).unwrap();
    let f = ellipsoid(10);
    let z = ChainState::new(vec![1.0; 10]).unwrap();
    let mut g = seeded(1);
    c.bench_function("chain_step/ellipsoid_xnes/10", |b| {
        b.iter(|| chain_step(black_box(&z), &f, &cfg, &mut g).unwrap())
    });
}

fn condition(c: &mut Criterion) {
    let spec = QuadratureSpec::default();
    c.bench_function("order_stat_m2/1_of_11", |b| {
        b.iter(|| order_stat_m2(black_box(1), 11, &spec).unwrap())
    });
    let w = [1.0 / 3.0; 3];
    c.bench_function("csa1_statistic/11_3/1e5", |b| {
        b.iter(|| csa1_statistic(black_box(&w), 11, 100_000, &mut seeded(2)).unwrap())
    });
}
