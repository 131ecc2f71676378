use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use piston_core::asymptotics::{sweep_steady, GeometricGrid, SweepConfig};
use piston_core::exec::Execution;
use piston_core::moc::{run, StepConfig};
use piston_core::piston::PistonSpec;
use piston_core::Gamma;

fn modes() -> [(&'static str, Execution); 2] {
    [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel { jobs: 0 }),
    ]
}

fn steady_sweep(c: &mut Criterion) {
    let cfg = SweepConfig {
        gammas: vec![1.2, 1.4, 5.0 / 3.0, 2.0, 2.5, 2.9],
        grid: GeometricGrid::spanning(1e-4, 1e-14, 41),
        ..SweepConfig::default()
    };
    let mut group = c.benchmark_group("sweep_steady");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| sweep_steady(black_box(&cfg), exec).unwrap())
        });
    }
    group.finish();
}

fn refinement_batch(c: &mut Criterion) {
    let gamma = Gamma::new(1.4).unwrap();
    let piston = PistonSpec::decaying_scaled(1.0, 0.5, 1.0, 0.1, 1e-4, gamma)
        .build()
        .unwrap();
    let step = StepConfig {
        snapshot_every: usize::MAX,
        ..StepConfig::default()
    };
    let nodes = [20usize, 30, 40, 50];
    let mut group = c.benchmark_group("refinement_batch");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                exec.map(&nodes, |&n| {
                    run(&piston, 1e-4, gamma, 1.0, 2.0, n, &step).unwrap().records.len()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, steady_sweep, refinement_batch);
criterion_main!(benches);
