use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use feynprop_bench::{forcing, query};
use feynprop_core::free_kernel::free_green;
use feynprop_core::model::ShiftedArgument;
use feynprop_core::pinned::phi_transform;
use feynprop_core::quadrature::gauss_jacobi_unit;
use feynprop_core::{ExpInsertion, PinConfiguration, TestFunction};

fn free(c: &mut Criterion) {
    let zero = TestFunction::zero();
    let theta = forcing();
    let q = query();
    c.bench_function("free_green/zero", |b| {
        let xi = ShiftedArgument::plain(&zero);
        b.iter(|| free_green(black_box(&xi), black_box(&q)))
    });
    c.bench_function("free_green/forced", |b| {
        let xi = ShiftedArgument::plain(&theta);
        b.iter(|| free_green(black_box(&xi), black_box(&q)))
    });
}

fn pinned(c: &mut Criterion) {
    let theta = forcing();
    let q = query();
    let pins = PinConfiguration::new(vec![0.3, 0.7], vec![0.0, 0.5]).unwrap();
    let ins = ExpInsertion::new(vec![0.2, 0.5, 0.9], vec![1.0, -0.5, 1.0]).unwrap();
    c.bench_function("phi_transform/2 pins 3 insertions", |b| {
        b.iter(|| phi_transform(black_box(&theta), &pins, &ins, &q).unwrap())
    });
}

fn rules(c: &mut Criterion) {
    // Rules are cached after the first call; this times the cache hit.
    c.bench_function("gauss_jacobi_unit/32 cached", |b| {
        b.iter(|| gauss_jacobi_unit(black_box(32), -0.5, -0.5))
    });
}

criterion_group!(benches, free, pinned, rules);
criterion_main!(benches);
