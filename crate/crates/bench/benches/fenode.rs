use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fenode::factorization::{gmf_fit, FitOptions};
use fenode::fe_distance::{fe_directed, fe_distance, sample_targets, FeParams, Horizon};
use fenode::similarity::{deepwalk_similarity, pos_neg_from_similarity, to_similarity};
use fenode::synthetic::sparse_connected;

fn recurrence(c: &mut Criterion) {
    let g = sparse_connected(2000, 20_000, 1).unwrap();
    let targets = sample_targets(g.node_count(), 32, 2).unwrap();
    let mut group = c.benchmark_group("fe_directed");
    group.sample_size(10);
    for l in [5, 10, 20] {
        let params = FeParams::new(1.0).with_horizon(Horizon::Steps(l));
        group.bench_with_input(BenchmarkId::new("horizon", l), &params, |b, p| {
            b.iter(|| fe_directed(&g, p, &targets).unwrap())
        });
    }
    group.finish();
}

fn factorization(c: &mut Criterion) {
    let g = sparse_connected(300, 1500, 3).unwrap();
    let delta = fe_distance(&g, 1.0, 1e-9).unwrap();
    let w = pos_neg_from_similarity(&to_similarity(&delta, 70.0, 6.0).unwrap()).unwrap();
    let mut group = c.benchmark_group("gmf_fit");
    group.sample_size(10);
    for dim in [16, 64] {
        let opts = FitOptions { dim, iterations: 50, ..Default::default() };
        group.bench_with_input(BenchmarkId::new("dim", dim), &opts, |b, o| b.iter(|| gmf_fit(&w, o).unwrap()));
    }
    group.finish();
}

fn deepwalk(c: &mut Criterion) {
    let g = sparse_connected(300, 1500, 4).unwrap();
    let mut group = c.benchmark_group("deepwalk_similarity");
    group.sample_size(10);
    group.bench_function("window_10", |b| b.iter(|| deepwalk_similarity(&g, 10, 1).unwrap()));
    group.finish();
}

criterion_group!(benches, recurrence, factorization, deepwalk);
criterion_main!(benches);
