//! Compares the data-parallel and sequential Monte Carlo classifiers on
//! identical workloads.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hulllab::sampler::{monte_carlo_classify, monte_carlo_classify_seq, Region};
use hulllab::state::Params;

fn bench_classify(c: &mut Criterion) {
    let params = Params::unit();
    let mut group = c.benchmark_group("monte_carlo_classify");
    for &n in &[200usize, 1000] {
        for (label, region) in [("kpoints", Region::KPoints), ("boundary", Region::Boundary)] {
            group.bench_with_input(
                BenchmarkId::new(format!("parallel/{label}"), n),
                &n,
                |b, &n| {
                    b.iter(|| monte_carlo_classify(&params, n, 42, 1e-9, &region).unwrap());
                },
            );
            group.bench_with_input(
                BenchmarkId::new(format!("sequential/{label}"), n),
                &n,
                |b, &n| {
                    b.iter(|| monte_carlo_classify_seq(&params, n, 42, 1e-9, &region).unwrap());
                },
            );
        }
    }
    group.finish();
}

criterion_group!(benches, bench_classify);
criterion_main!(benches);
