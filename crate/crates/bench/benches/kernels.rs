use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hnls_bench::fixture;
use hnls_core::spectral::trilinear_t;
use hnls_core::{step_strang, Direction};

fn fft(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft_2d");
    for n in [64, 128, 256] {
        let (u, _) = fixture(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &u, |b, u| {
            b.iter(|| black_box(u.transform(Direction::Forward).unwrap()))
        });
    }
    group.finish();
}

fn strang(c: &mut Criterion) {
    let mut group = c.benchmark_group("strang_step");
    for n in [64, 128, 256] {
        let (u, k) = fixture(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &u, |b, u| {
            b.iter(|| black_box(step_strang(u, 0.01, &k).unwrap()))
        });
    }
    group.finish();
}

fn trilinear(c: &mut Criterion) {
    let mut group = c.benchmark_group("trilinear");
    for n in [64, 128, 256] {
        let (u, k) = fixture(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &u, |b, u| {
            b.iter(|| black_box(trilinear_t(u, u, u, &k).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, fft, strang, trilinear);
criterion_main!(benches);
