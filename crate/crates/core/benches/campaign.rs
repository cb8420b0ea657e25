use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ponsim::probes::{all_pairs_ping, scenario_traceroute};
use ponsim::topo::build_reference_testbed;
use ponsim::Execution;

fn traceroute(c: &mut Criterion) {
    let mut s = build_reference_testbed();
    s.probe.probes_per_run = 30;
    let (src, dst) = s.default_endpoints().unwrap();
    let mut g = c.benchmark_group("traceroute_campaign");
    g.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, exec| {
            b.iter(|| scenario_traceroute(&s, &src, &dst, *exec).unwrap())
        });
    }
    g.finish();
}

fn all_pairs(c: &mut Criterion) {
    let s = build_reference_testbed();
    let mut g = c.benchmark_group("all_pairs_ping");
    g.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, exec| {
            b.iter(|| all_pairs_ping(&s, 5, *exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, traceroute, all_pairs);
criterion_main!(benches);
