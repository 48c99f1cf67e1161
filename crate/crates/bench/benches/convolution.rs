use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sphconv::harness::run_op;

fn spectral(c: &mut Criterion) {
    for op in ["s2_conv", "so3_conv"] {
        let mut group = c.benchmark_group(op);
        for b in [4usize, 8, 16] {
            group.bench_with_input(BenchmarkId::from_parameter(b), &b, |bench, &b| {
                bench.iter(|| black_box(run_op(op, b, 0).unwrap()))
            });
        }
        group.finish();
    }
}

fn oracles(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    for (op, b) in [("s2_conv_oracle", 4usize), ("so3_conv_oracle", 3)] {
        group.bench_with_input(BenchmarkId::new(op, b), &b, |bench, &b| {
            bench.iter(|| black_box(run_op(op, b, 0).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, spectral, oracles);
criterion_main!(benches);
