//! Sequential vs rayon execution of the Monte Carlo kernels.
//!
//! ```bash
//! cargo bench -p clt-lab --bench monte_carlo
//! ```
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use clt_lab::exchange::{swap_chain_scan, ChainSpec, TestFn};
use clt_lab::par::{self, Execution};
use clt_lab::sampling::{DistributionSpec, RngState};
use clt_lab::specfun::TransitionFn;

const SAMPLES: usize = 200_000;

fn normal_sum_chunks(exec: Execution, n: usize) -> f64 {
    let parts = par::map_chunks_with(exec, par::chunk_count(SAMPLES), |c| {
        let mut rng = RngState::new(7, c as u64);
        let d = DistributionSpec::rademacher();
        par::chunk_range(c, SAMPLES).map(|_| (0..n).map(|_| d.sample(&mut rng)).sum::<f64>()).sum::<f64>()
    });
    par::pairwise_reduce(parts, |a, b| a + b).unwrap_or(0.0)
}

fn bench_sums(c: &mut Criterion) {
    let mut group = c.benchmark_group("rademacher_sums");
    for n in [16usize, 64] {
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| normal_sum_chunks(Execution::Sequential, n))
        });
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| normal_sum_chunks(Execution::Parallel, n))
        });
    }
    group.finish();
}

fn bench_swap_chain(c: &mut Criterion) {
    let f = TestFn::Transition(TransitionFn::drop_before(0.0, 0.5).unwrap());
    let chain = ChainSpec::iid(DistributionSpec::rademacher(), 32, f, 20_000, 42).unwrap();
    let mut group = c.benchmark_group("swap_chain_n32");
    group.sample_size(10);
    group.bench_function("workers_1", |b| b.iter(|| par::with_workers(1, || swap_chain_scan(&chain, 0.05).unwrap())));
    group.bench_function("workers_all", |b| b.iter(|| par::with_workers(0, || swap_chain_scan(&chain, 0.05).unwrap())));
    group.finish();
}

criterion_group!(benches, bench_sums, bench_swap_chain);
criterion_main!(benches);
