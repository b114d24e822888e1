//! Shared fixtures for the benchmarks.

use swarmgraph_core::harness::{generate_tasks, task_truth, SwarmSpec, TaskParams};
use swarmgraph_core::{CompositeGraph, MockExecutor, MockPolicy};

pub use swarmgraph_core::harness::TaskInstance;

/// A `k` truthful + `k` adversarial swarm with a majority-vote decision.
pub fn swarm(k: usize) -> CompositeGraph {
    SwarmSpec::adversarial(k, k).build().expect("valid swarm")
}

/// `n` tasks and a mock executor that knows their answers.
pub fn tasks_and_mock(n: usize) -> (Vec<TaskInstance>, MockExecutor) {
    let tasks = generate_tasks(&TaskParams { count: n, ..Default::default() }, 1).expect("valid params");
    let mock = MockExecutor::new(MockPolicy::default(), task_truth(&tasks));
    (tasks, mock)
}
