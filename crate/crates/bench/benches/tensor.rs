use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use tdvar_core::tensor::{kronecker, mode_n_matricize, mode_n_product};
use tdvar_core::{Matrix, Tensor3, TuckerFactors};

fn random_factors(k: usize, lags: usize, r: [usize; 3], rng: &mut ChaCha8Rng) -> TuckerFactors {
    let mut m = |rows, cols| Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    let (b1, b2, b3) = (m(k, r[0]), m(k, r[1]), m(lags, r[2]));
    let core = Tensor3::from_fn(r, |_, _, _| rng.random_range(-1.0..1.0)).unwrap();
    TuckerFactors::new(core, b1, b2, b3).unwrap()
}

fn reconstruct(c: &mut Criterion) {
    let mut group = c.benchmark_group("tucker_reconstruct");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for &(k, lags, r) in &[(10, 6, [10, 10, 6]), (50, 4, [10, 10, 4]), (200, 4, [10, 10, 4])] {
        let f = random_factors(k, lags, r, &mut rng);
        group
            .bench_with_input(BenchmarkId::new("full", format!("K{k}_L{lags}")), &f, |b, f| b.iter(|| black_box(f.reconstruct().unwrap())));
        group.bench_with_input(BenchmarkId::new("mode1", format!("K{k}_L{lags}")), &f, |b, f| {
            b.iter(|| black_box(f.mode1_matrix().unwrap()))
        });
    }
    group.finish();
}

fn primitives(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = Tensor3::from_fn([50, 50, 6], |_, _, _| rng.random_range(-1.0..1.0)).unwrap();
    let m = Matrix::from_fn(10, 50, |_, _| rng.random_range(-1.0..1.0));
    c.bench_function("mode2_matricize_50x50x6", |b| b.iter(|| black_box(mode_n_matricize(&t, 2).unwrap())));
    c.bench_function("mode1_product_50x50x6_by_10x50", |b| b.iter(|| black_box(mode_n_product(&t, &m, 1).unwrap())));
    let a = Matrix::from_fn(6, 6, |i, j| (i * 6 + j) as f64);
    let bm = Matrix::from_fn(10, 10, |i, j| (i + j) as f64);
    c.bench_function("kronecker_6x6_10x10", |b| b.iter(|| black_box(kronecker(&a, &bm))));
}

criterion_group!(benches, reconstruct, primitives);
criterion_main!(benches);
