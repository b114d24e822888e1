use std::collections::BTreeMap;

use swarmgraph_core::backends::{DrawKey, MockExecutor, MockPolicy};
use swarmgraph_core::dist::LOGIT_CAP;
use swarmgraph_core::harness::{answers, generate_tasks, option_labels, task_truth, SwarmSpec, TaskParams};
use swarmgraph_core::reinforce::EdgeOptConfig;
use swarmgraph_core::{run_adversarial_experiment, EdgeDistribution, ExperimentConfig};

#[test]
fn gold_placement_passes_chi_square() {
    let tasks = generate_tasks(&TaskParams { count: 10_000, ..Default::default() }, 2024).unwrap();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &tasks {
        *counts.entry(t.gold.as_str()).or_default() += 1;
    }
    assert_eq!(counts.len(), 4);
    let expected = 10_000.0 / 4.0;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99th percentile of χ² with 3 degrees of freedom.
    assert!(chi2 < 11.345, "χ² = {chi2}, counts {counts:?}");
}

/// Two perfect truthful agents and two always-wrong adversaries drawing
/// independently. The vote loses only when both adversaries name the same
/// wrong label w (probability 1/3 · 1/3 per label) and the 2–2 tie goes to w,
/// i.e. w sorts before the gold label.
#[test]
fn full_2t2a_accuracy_matches_enumeration() {
    let tasks = generate_tasks(&TaskParams { count: 4000, ..Default::default() }, 77).unwrap();
    let policy = MockPolicy {
        truthful_accuracy: 1.0,
        adversarial_accuracy: 0.0,
        alphabet: option_labels(4),
        seed: 5,
        draw_key: DrawKey::Node,
    };
    let mock = MockExecutor::new(policy, task_truth(&tasks));
    let composite = SwarmSpec::adversarial(2, 2).build().unwrap();
    let full = EdgeDistribution::from_logits(&composite, vec![LOGIT_CAP; composite.potential_edges().len()])
        .unwrap()
        .realize(&composite, 0.5);
    let graph = composite.prune(&full).unwrap();
    assert_eq!(graph.nodes().len(), 5);

    let outs = answers(&graph, &tasks, &mock).unwrap();
    let labels = option_labels(4);
    let (mut expected, mut variance, mut observed) = (0.0, 0.0, 0.0);
    for (t, out) in tasks.iter().zip(&outs) {
        let losing = labels.iter().filter(|w| **w != t.gold && w.as_str() < t.gold.as_str()).count();
        let p = 1.0 - losing as f64 / 9.0;
        expected += p;
        variance += p * (1.0 - p);
        observed += t.is_correct(out) as u8 as f64;
    }
    let n = tasks.len() as f64;
    let z = (observed - expected) / variance.sqrt();
    assert!(z.abs() < 3.0, "observed {} vs exact {} (z = {z:.2})", observed / n, expected / n);
    assert!((expected / n - 5.0 / 6.0).abs() < 0.02);
}

#[test]
fn experiment_is_reproducible_and_paired() {
    let config = ExperimentConfig {
        seed: 4,
        eval_tasks: 40,
        optimization_tasks: 50,
        edge_opt: EdgeOptConfig { iterations: 20, ..Default::default() },
        ..Default::default()
    };
    let a = run_adversarial_experiment(&config, None).unwrap();
    let b = run_adversarial_experiment(&config, None).unwrap();
    assert_eq!(serde_json::to_string(&a.report).unwrap(), serde_json::to_string(&b.report).unwrap());
    assert_eq!(a.params, b.params);
    assert_eq!(a.record, b.record);

    let ids: Vec<&str> = a.report.outcomes.iter().map(|o| o.problem_id.as_str()).collect();
    let (opt, eval) = config.tasks().unwrap();
    assert!(opt.iter().all(|t| !ids.contains(&t.problem_id.as_str())));
    assert_eq!(ids, eval.iter().map(|t| t.problem_id.as_str()).collect::<Vec<_>>());
}

#[test]
fn table_of_potential_edge_counts() {
    for (k, expected) in [(1, 4), (3, 36), (5, 100), (7, 196)] {
        let c = SwarmSpec::adversarial(k, k).build().unwrap();
        assert_eq!(c.potential_edges().len(), expected, "k = {k}");
        assert_eq!(c.agents().len(), 2 * k + 1);
    }
}
