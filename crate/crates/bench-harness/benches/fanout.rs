//! Reconcile-step fan-out: one step that syncs 200 annotated jobs over HTTP,
//! with the calls spread over a rayon pool versus issued in order.

use std::collections::BTreeMap;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use slingkube_sim::env::{CniMode, EnvConfig, Environment};
use slingkube_sim::{JobSpec, SimConfig};

const JOBS: usize = 200;

fn loaded(fanout_threads: usize) -> Environment {
    let env = Environment::start(EnvConfig {
        sim: SimConfig {
            fanout_threads,
            ..Default::default()
        },
        cni: CniMode::None,
        ..Default::default()
    })
    .expect("environment starts");
    let vni = BTreeMap::from([("vni".to_owned(), "true".to_owned())]);
    for i in 0..JOBS {
        env.cluster.submit_job("fan", &format!("j{i:03}"), vni.clone(), JobSpec::echo()).unwrap();
    }
    env
}

fn sync_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("sync_step");
    group.sample_size(10).measurement_time(Duration::from_secs(20));
    for (label, threads) in [("parallel", 8), ("sequential", 0)] {
        group.bench_function(BenchmarkId::new(label, JOBS), |b| {
            b.iter_batched(
                || loaded(threads),
                |env| {
                    env.cluster.reconcile_step();
                    assert_eq!(env.cluster.stats().sync_calls as usize, JOBS);
                    env
                },
                BatchSize::PerIteration,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, sync_step);
criterion_main!(benches);
