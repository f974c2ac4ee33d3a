use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use hiblk::certificates::{run_suite, InequalityKind};
use hiblk::coherence::{block_coherence, hier_block_coherence, mutual_coherence};
use hiblk::linalg::{rho_c, BlockPartition};
use hiblk::model::gaussian_matrix;
use hiblk::CoherenceStrategy;

fn coherences(c: &mut Criterion) {
    let d = gaussian_matrix(128, 512, 3).unwrap().entries;
    c.bench_function("mutual_coherence/128x512", |b| {
        b.iter(|| mutual_coherence(black_box(&d)).unwrap())
    });
    c.bench_function("block_coherence/128x512/d2", |b| {
        b.iter(|| block_coherence(black_box(&d), 2).unwrap())
    });
    let small = gaussian_matrix(32, 24, 4).unwrap().entries;
    let mut group = c.benchmark_group("hier_block_coherence_exact");
    for d_star in [2usize, 4, 6] {
        group.bench_with_input(BenchmarkId::from_parameter(d_star), &d_star, |b, &ds| {
            b.iter(|| hier_block_coherence(black_box(&small), 2, ds, CoherenceStrategy::exact()).unwrap())
        });
    }
    group.finish();
    c.bench_function("hier_block_coherence_sampled/128x512/d16", |b| {
        let s = CoherenceStrategy::Sampled { count: 2000, seed: 1 };
        b.iter(|| hier_block_coherence(black_box(&d), 2, 16, s).unwrap())
    });
}

fn norms(c: &mut Criterion) {
    let a = gaussian_matrix(64, 64, 9).unwrap().entries;
    c.bench_function("rho_c/64x64/(4,4)", |b| {
        b.iter(|| rho_c(black_box(&a), BlockPartition::new(4, 4)).unwrap())
    });
    c.bench_function("inequality_suite/lemma8/100", |b| {
        b.iter(|| run_suite(InequalityKind::Lemma8, 100, 1))
    });
}

criterion_group!(benches, coherences, norms);
criterion_main!(benches);
