use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use feynprop_bench::{exp_plus_delta, fixed_order, query, sampled, single_delta, tensor};
use feynprop_core::series::{propagator, term_value};
use feynprop_core::TestFunction;

fn terms(c: &mut Criterion) {
    let theta = TestFunction::zero();
    let p = single_delta();
    let q = query();
    let spec = tensor();
    let mut group = c.benchmark_group("term_value/delta");
    for n in 1..=4 {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| term_value(black_box(n), n, &theta, &p, &q, &spec).unwrap())
        });
    }
    group.finish();
}

fn truncated(c: &mut Criterion) {
    let theta = TestFunction::zero();
    let p = exp_plus_delta();
    let q = query();
    let mut group = c.benchmark_group("propagator/order 6");
    group.sample_size(10);
    for (name, spec) in [("tensor", tensor()), ("dirichlet_mc", sampled())] {
        group.bench_function(name, |b| {
            b.iter(|| propagator(&theta, black_box(&p), &q, &spec, &fixed_order(6)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, terms, truncated);
criterion_main!(benches);
