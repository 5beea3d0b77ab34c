//! Rayon scheduling against the sequential fallback on the two parallel
//! workloads: per-time-point unitary series and per-trajectory ensembles.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use otoc::exec::Exec;
use otoc::open::{DissipationParams, OpenProtocol};
use otoc::protocols::Protocol;
use otoc::runner::kicked_top_base;

fn unitary_series(c: &mut Criterion) {
    let spec = kicked_top_base(200, 20).protocol_spec().unwrap();
    let p = Protocol::new(spec).unwrap();
    let mut group = c.benchmark_group("kicked_top_series_n200");
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &e| b.iter(|| p.series(e).unwrap()),
        );
    }
    group.finish();
}

fn trajectory_ensemble(c: &mut Criterion) {
    let spec = kicked_top_base(50, 4).protocol_spec().unwrap();
    let rates = DissipationParams::new(1.0, 100.0, 20.0).unwrap().rates();
    let open = OpenProtocol::new(spec, rates).unwrap();
    let mut group = c.benchmark_group("trajectories_n50_x40");
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &e| b.iter(|| open.run(40, 1, e).unwrap()),
        );
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10).measurement_time(Duration::from_secs(3));
    targets = unitary_series, trajectory_ensemble
}
criterion_main!(benches);
