use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rosenblatt_hurst::exec::Execution;
use rosenblatt_hurst::harness::{run_montecarlo, ExperimentConfig};
use rosenblatt_hurst::quadrature::{tau1, TruncationPolicy};
use rosenblatt_hurst::{Filter, HurstParam};

fn tau1_bench(c: &mut Criterion) {
    let f = Filter::finite_difference(2).unwrap();
    let h = HurstParam::new(0.7).unwrap();
    let mut group = c.benchmark_group("tau1");
    group.sample_size(10);
    for (name, execution) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        let policy = TruncationPolicy { k_max: 2000, execution, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &policy, |b, p| b.iter(|| tau1(&f, &h, p).unwrap()));
    }
    group.finish();
}

fn montecarlo_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("montecarlo");
    group.sample_size(10);
    for (name, workers) in [("sequential", 1), ("parallel", 0)] {
        let cfg = ExperimentConfig {
            hurst: vec![0.7],
            n: vec![256, 1024],
            filters: vec!["fd:2".into(), "db:4".into()],
            replicates: 64,
            oversample: 8,
            reference_samples: 0,
            workers,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| run_montecarlo(cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, tau1_bench, montecarlo_bench);
criterion_main!(benches);
