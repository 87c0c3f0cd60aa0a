use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kbandit_bench::experiment;
use kbandit_core::harness::{run_replicate, Algorithm};

fn whole_runs(c: &mut Criterion) {
    let mut g = c.benchmark_group("run_n5_t20_d5");
    g.sample_size(10);
    for algo in [
        Algorithm::DiskernelExact,
        Algorithm::ApproxDiskernel,
        Algorithm::Dislinucb,
        Algorithm::OneKernelucb,
        Algorithm::NKernelucb,
    ] {
        let mut cfg = experiment(algo, 5, 20, 5);
        cfg.approx.qbar = Some(2.0);
        g.bench_with_input(BenchmarkId::from_parameter(algo), &cfg, |b, cfg| {
            b.iter(|| run_replicate(cfg, 0).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, whole_runs);
criterion_main!(benches);
