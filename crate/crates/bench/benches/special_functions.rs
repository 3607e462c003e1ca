use std::hint::black_box;

use capwave_core::{complete_elliptic_k, incomplete_elliptic_f, jacobi_elliptic, EllipticModulusSquared};
use criterion::{criterion_group, criterion_main, Criterion};

fn jacobi(c: &mut Criterion) {
    let mut group = c.benchmark_group("jacobi_elliptic");
    for m in [0.0, 0.5, 0.99, 1.0 - 1e-13] {
        let mm = EllipticModulusSquared::new(m).unwrap();
        group.bench_function(format!("m={m}"), |b| {
            b.iter(|| jacobi_elliptic(black_box(3.7), black_box(mm)))
        });
    }
    group.finish();
}

fn integrals(c: &mut Criterion) {
    c.bench_function("complete_elliptic_k", |b| {
        b.iter(|| complete_elliptic_k(black_box(0.7)))
    });
    c.bench_function("incomplete_elliptic_f", |b| {
        b.iter(|| incomplete_elliptic_f(black_box(1.2), black_box(0.7)))
    });
}

criterion_group!(benches, jacobi, integrals);
criterion_main!(benches);
