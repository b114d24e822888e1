use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swarmgraph_bench::{swarm, tasks_and_mock};
use swarmgraph_core::graph::execute;
use swarmgraph_core::harness::single_task_utility;
use swarmgraph_core::reinforce::{optimize_edges, EdgeOptConfig};
use swarmgraph_core::EdgeDistribution;

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample");
    for k in [1, 3, 5, 7] {
        let composite = swarm(k);
        let dist = EdgeDistribution::new(&composite, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        group.bench_with_input(BenchmarkId::from_parameter(composite.potential_edges().len()), &k, |b, _| {
            b.iter(|| dist.sample(&composite, &mut rng))
        });
    }
    group.finish();
}

fn log_prob(c: &mut Criterion) {
    let mut group = c.benchmark_group("log_prob");
    for k in [1, 3, 5, 7] {
        let composite = swarm(k);
        let dist = EdgeDistribution::new(&composite, 0.5).unwrap();
        let mask = dist.sample(&composite, &mut ChaCha8Rng::seed_from_u64(1)).included;
        group.bench_with_input(BenchmarkId::from_parameter(composite.potential_edges().len()), &k, |b, _| {
            b.iter(|| dist.log_prob(&composite, black_box(&mask)).unwrap())
        });
    }
    group.finish();
}

fn execution(c: &mut Criterion) {
    let (tasks, mock) = tasks_and_mock(16);
    let mut group = c.benchmark_group("execute");
    for k in [1, 3, 7] {
        let composite = swarm(k);
        let dist = EdgeDistribution::new(&composite, 0.5).unwrap();
        let edges = dist.sample(&composite, &mut ChaCha8Rng::seed_from_u64(2)).edges(&dist);
        let dag = composite.prune(&edges).unwrap().to_dag();
        let input = tasks[0].input();
        group.bench_with_input(BenchmarkId::from_parameter(2 * k), &k, |b, _| {
            b.iter(|| execute(&dag, black_box(&input), &mock).unwrap())
        });
    }
    group.finish();
}

fn optimize_iteration(c: &mut Criterion) {
    let (tasks, mock) = tasks_and_mock(200);
    let composite = swarm(2);
    let estimator = single_task_utility(&tasks, &mock);
    let config = EdgeOptConfig { iterations: 1, ..Default::default() };
    c.bench_function("optimize_edges/one_iteration_2t2a", |b| {
        b.iter(|| optimize_edges(&composite, &estimator, &config).unwrap())
    });
}

criterion_group!(benches, sampling, log_prob, execution, optimize_iteration);
criterion_main!(benches);
