//! Properties of the edge distribution and composite pruning on randomly
//! shaped swarms.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swarmgraph_core::dist::LOGIT_CAP;
use swarmgraph_core::graph::{AgentGraph, CompositeGraph, Edge, Node, NodeId, Routine};
use swarmgraph_core::reinforce::estimate_gradient;
use swarmgraph_core::EdgeDistribution;

fn chain_agent(id: &str, n: usize) -> AgentGraph {
    let ids: Vec<NodeId> = (0..n).map(|i| NodeId::new(id, format!("n{i}"))).collect();
    let nodes = ids.iter().map(|nid| Node::new(nid.clone(), Routine::llm(""))).collect();
    let edges: Vec<Edge> = ids.windows(2).map(|w| Edge::new(w[0].clone(), w[1].clone())).collect();
    AgentGraph::new(id, nodes, edges, ids[n - 1].clone()).unwrap()
}

/// Up to three agents of one or two nodes; the last agent is the output and
/// `wired[i]` mandates an edge from agent i's output into it.
fn composite(sizes: &[usize], wired: &[bool]) -> CompositeGraph {
    let names = ["a", "b", "c"];
    let agents: Vec<AgentGraph> = sizes.iter().zip(names).map(|(&n, id)| chain_agent(id, n)).collect();
    let out = agents.len() - 1;
    let target = NodeId::new(names[out], "n0");
    let mandated: Vec<Edge> = agents[..out]
        .iter()
        .zip(wired)
        .filter(|(_, &w)| w)
        .map(|(a, _)| Edge::new(a.output().clone(), target.clone()))
        .collect();
    CompositeGraph::compose(agents, out, mandated).unwrap()
}

fn masks(d: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1u32 << d).map(move |b| (0..d).map(|i| b >> i & 1 == 1).collect())
}

prop_compose! {
    fn swarm()(sizes in prop::collection::vec(1usize..=2, 2..=3), wired in prop::collection::vec(any::<bool>(), 2))
        -> CompositeGraph {
        composite(&sizes, &wired)
    }
}

prop_compose! {
    fn swarm_with_logits()(c in swarm().prop_filter("enumerable", |c| c.potential_edges().len() <= 10))
        (logits in prop::collection::vec(-4.0f64..4.0, c.potential_edges().len()), c in Just(c))
        -> (CompositeGraph, Vec<f64>) {
        (c, logits)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mask_probabilities_sum_to_one((c, logits) in swarm_with_logits()) {
        let dist = EdgeDistribution::from_logits(&c, logits).unwrap();
        let total: f64 = masks(dist.len()).filter_map(|m| dist.log_prob(&c, &m).ok()).map(f64::exp).sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "total {}", total);
    }

    #[test]
    fn score_function_has_zero_mean((c, logits) in swarm_with_logits()) {
        let dist = EdgeDistribution::from_logits(&c, logits).unwrap();
        let mut mean = vec![0.0; dist.len()];
        for m in masks(dist.len()) {
            if let Ok(lp) = dist.log_prob(&c, &m) {
                for (acc, g) in mean.iter_mut().zip(dist.grad_log_prob(&c, &m).unwrap()) {
                    *acc += lp.exp() * g;
                }
            }
        }
        prop_assert!(mean.iter().all(|x| x.abs() < 1e-12), "{:?}", mean);
    }

    #[test]
    fn baseline_shift_leaves_expected_gradient_unchanged((c, logits) in swarm_with_logits(), shift in -2.0f64..2.0) {
        let dist = EdgeDistribution::from_logits(&c, logits).unwrap();
        let utility = |m: &[bool]| m.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| (i % 3) as f64 - 0.5).sum::<f64>();
        let mut plain = vec![0.0; dist.len()];
        let mut shifted = vec![0.0; dist.len()];
        for m in masks(dist.len()) {
            let Ok(lp) = dist.log_prob(&c, &m) else { continue };
            let sample = swarmgraph_core::GraphSample {
                eligible: dist.eligibility(&c, &m).unwrap(),
                included: m.clone(),
                log_prob: lp,
            };
            let u = utility(&m);
            let g0 = estimate_gradient(&dist, &c, std::slice::from_ref(&sample), &[u], 0.0).unwrap();
            let g1 = estimate_gradient(&dist, &c, &[sample], &[u], shift).unwrap();
            for i in 0..dist.len() {
                plain[i] += lp.exp() * g0[i];
                shifted[i] += lp.exp() * g1[i];
            }
        }
        for (a, b) in plain.iter().zip(&shifted) {
            prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
        }
    }

    #[test]
    fn samples_are_acyclic_and_self_consistent(c in swarm(), seed in any::<u64>(), p in 0.0f64..=1.0) {
        let dist = EdgeDistribution::new(&c, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..8 {
            let s = dist.sample(&c, &mut rng);
            prop_assert!(c.realized_dag(&s.edges(&dist)).is_ok());
            prop_assert_eq!(dist.log_prob(&c, &s.included).unwrap(), s.log_prob);
            prop_assert_eq!(dist.eligibility(&c, &s.included).unwrap(), s.eligible.clone());
            let grad = dist.grad_log_prob(&c, &s.included).unwrap();
            for (g, e) in grad.iter().zip(&s.eligible) {
                if !e {
                    prop_assert_eq!(*g, 0.0);
                }
            }
        }
    }

    #[test]
    fn realized_edges_form_a_dag(c in swarm(), logits in prop::collection::vec(-LOGIT_CAP..LOGIT_CAP, 64), t in 0.0f64..=1.0) {
        let dist = EdgeDistribution::from_logits(&c, logits[..c.potential_edges().len()].to_vec()).unwrap();
        let edges = dist.realize(&c, t);
        prop_assert!(c.realized_dag(&edges).is_ok());
        for e in &edges {
            let i = dist.edges().iter().position(|x| x == e).unwrap();
            prop_assert!(dist.probs()[i] >= t);
        }
    }

    #[test]
    fn prune_is_idempotent(c in swarm(), seed in any::<u64>()) {
        let dist = EdgeDistribution::new(&c, 0.5).unwrap();
        let edges = dist.sample(&c, &mut ChaCha8Rng::seed_from_u64(seed)).edges(&dist);
        let once = c.prune(&edges).unwrap();
        let kept: Vec<Edge> = edges
            .iter()
            .filter(|e| once.node_index(e.src()).is_some() && once.node_index(e.dst()).is_some())
            .cloned()
            .collect();
        prop_assert_eq!(once.prune(&kept).unwrap(), once.clone());
        prop_assert_eq!(once.prune(&[]).unwrap(), once.clone());
        prop_assert!(once.node_index(c.output()).is_some());
        let dag = once.to_dag();
        for id in once.nodes() {
            let mut frontier = vec![id.clone()];
            let mut reached = id == c.output();
            while let Some(v) = frontier.pop() {
                for e in dag.edges().iter().filter(|e| *e.src() == v) {
                    reached |= e.dst() == c.output();
                    frontier.push(e.dst().clone());
                }
            }
            prop_assert!(reached, "{} cannot reach the output", id);
        }
    }
}

#[test]
fn mutual_cycle_has_three_reachable_masks() {
    let c = composite(&[1, 1, 1], &[true, true]);
    assert_eq!(c.potential_edges().len(), 2);
    let dist = EdgeDistribution::from_logits(&c, vec![0.3, -1.1]).unwrap();
    let reachable: Vec<Vec<bool>> = masks(2).filter(|m| dist.log_prob(&c, m).is_ok()).collect();
    assert_eq!(reachable, [vec![false, false], vec![true, false], vec![false, true]]);
}
