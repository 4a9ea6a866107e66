//! Parallel versus sequential execution on the two embarrassingly parallel workloads.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use csoc_core::exec::Execution;
use csoc_core::hierarchy::{default_grid, tsirelson_curve, Variant};
use csoc_core::protocol::{run_tcf_protocol, RunOptions, TcfConfig, TcfProver, ToyTcf};
use csoc_core::solver::SolverSettings;

const MODES: [(&str, Execution); 2] = [
    ("parallel", Execution::Parallel),
    ("sequential", Execution::Sequential),
];

fn curve(c: &mut Criterion) {
    let grid = default_grid();
    let settings = SolverSettings::default();
    let mut group = c.benchmark_group("tsirelson_curve_level2");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| tsirelson_curve(&grid, 2, Variant::Quantum, &settings, exec))
        });
    }
    group.finish();
}

fn shots(c: &mut Criterion) {
    let tcf = ToyTcf::generate(8, 1).expect("toy function");
    let config = TcfConfig::default();
    let mut group = c.benchmark_group("tcf_shots_200k");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = RunOptions {
            exec,
            ..RunOptions::new(200_000, 5)
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_tcf_protocol(&tcf, TcfProver::Honest, &config, &opts).expect("run"))
        });
    }
    group.finish();
}

criterion_group!(benches, curve, shots);
criterion_main!(benches);
