use criterion::{black_box, criterion_group, criterion_main, Criterion};
use ruin_bench::desk_model;
use ruin_core::montecarlo::{simulate_ruin, SimulationConfig};

fn simulation(c: &mut Criterion) {
    let m = desk_model();
    let config = SimulationConfig { paths: 10_000, horizon: 20.0, ..SimulationConfig::default() };
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    group.bench_function("simulate_ruin 1e4 paths horizon 20", |b| b.iter(|| simulate_ruin(&m, black_box(&config)).unwrap().claim));
    group.finish();
}

criterion_group!(benches, simulation);
criterion_main!(benches);
