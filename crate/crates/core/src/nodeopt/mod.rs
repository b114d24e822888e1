//! Node-level prompt optimization.
//!
//! Graph runs are recorded into a per-node [`HistoryStore`]. Every
//! `update_every` problems, each optimizable node's prompt is passed through
//! an [`Improver`] that sees only that node's history, prompt and
//! description. All nodes are updated from the same snapshot of prompts.

mod history;
mod improvers;
mod rewrite;

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::Executor;
use crate::graph::{execute, CompositeGraph, Dag, Demo, GraphError, Input, Node, NodeId, Prompt};

pub use history::{HistoryEntry, HistoryStore, NodeHistory, DEFAULT_HISTORY_CAP};
pub use improvers::{
    greedy_demo_improver, ucb1_arms, ucb1_demo_improver, ExecutorReplay, GreedyDemoImprover, Improver, ReplayScorer,
    Ucb1, Ucb1DemoImprover,
};
pub use rewrite::LlmRewriteImprover;

#[derive(Debug, thiserror::Error)]
pub enum NodeOptError {
    #[error("replay failed: {0}")]
    ReplayFailure(String),
    #[error("problem {problem} failed")]
    Execution {
        problem: usize,
        #[source]
        source: GraphError,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NodeOptConfig {
    pub update_every: usize,
    pub max_demos: usize,
    pub replay_window: usize,
    pub ucb_iterations: usize,
    pub seed: u64,
    pub history_cap: usize,
    /// An invocation is a positive example when its score reaches this.
    pub positive_threshold: f64,
}

impl Default for NodeOptConfig {
    fn default() -> Self {
        NodeOptConfig {
            update_every: 4,
            max_demos: 4,
            replay_window: 10,
            ucb_iterations: 100,
            seed: 0,
            history_cap: DEFAULT_HISTORY_CAP,
            positive_threshold: 1.0,
        }
    }
}

impl NodeOptConfig {
    pub fn validate(&self) -> Result<(), NodeOptError> {
        let counts = [
            ("update_every", self.update_every),
            ("max_demos", self.max_demos),
            ("replay_window", self.replay_window),
            ("ucb_iterations", self.ucb_iterations),
            ("history_cap", self.history_cap),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(NodeOptError::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Rng for the `update`-th improvement of `node`. Depends on nothing else,
/// so one node's update never shifts another's random stream.
pub fn node_rng(seed: u64, node: &NodeId, update: usize) -> ChaCha8Rng {
    let id = node.to_string();
    let [stream, _] = crate::backends::digest_u64(&[id.as_bytes(), &(update as u64).to_le_bytes()]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeUpdate {
    /// Number of problems run before this update.
    pub after_problem: usize,
    pub node: NodeId,
    pub changed: bool,
    pub prompt: Prompt,
}

#[derive(Clone, Debug)]
pub struct NodeOptRun {
    pub scores: Vec<f64>,
    pub updates: Vec<NodeUpdate>,
    pub history: HistoryStore,
}

/// Runs `problems` through `dag` in order, scoring each final output with
/// `score`, and applies `improver` to every optimizable node after each
/// `update_every` problems. Every node of a run shares that run's score.
pub fn optimize_nodes(
    dag: &mut Dag,
    problems: &[Input],
    executor: &dyn Executor,
    improver: &dyn Improver,
    score: &dyn Fn(&Input, &str) -> f64,
    config: &NodeOptConfig,
) -> Result<NodeOptRun, NodeOptError> {
    config.validate()?;
    let targets: Vec<NodeId> = dag.nodes().filter(|n| n.is_optimizable()).map(|n| n.id.clone()).collect();
    let mut history = HistoryStore::new(config.history_cap);
    let mut scores = Vec::with_capacity(problems.len());
    let mut updates = Vec::new();
    for (k, input) in problems.iter().enumerate() {
        let trace = execute(dag, input, executor).map_err(|source| NodeOptError::Execution { problem: k, source })?;
        let s = score(input, &trace.final_output);
        scores.push(s);
        let by_node: BTreeMap<NodeId, f64> = trace.records.iter().map(|r| (r.node.clone(), s)).collect();
        history.record(&trace, &by_node);

        if (k + 1) % config.update_every != 0 {
            continue;
        }
        let round = (k + 1) / config.update_every - 1;
        let snapshot: &Dag = dag;
        let new_prompts: Vec<(NodeId, Prompt)> = targets
            .par_iter()
            .map(|id| {
                let node = snapshot.node(id).expect("target is in the graph");
                let mut rng = node_rng(config.seed, id, round);
                improver.improve(node, &history.entries(id), &mut rng).map(|p| (id.clone(), p))
            })
            .collect::<Result<_, _>>()?;
        for (id, prompt) in new_prompts {
            let node = dag.node_mut(&id).expect("target is in the graph");
            let changed = node.prompt != prompt;
            node.prompt = prompt.clone();
            updates.push(NodeUpdate { after_problem: k + 1, node: id, changed, prompt });
        }
    }
    Ok(NodeOptRun { scores, updates, history })
}

/// On-disk form of one node's prompt.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptState {
    pub node_id: NodeId,
    pub instruction: String,
    pub demos: Vec<Demo>,
}

impl PromptState {
    pub fn of(node: &Node) -> Self {
        PromptState {
            node_id: node.id.clone(),
            instruction: node.prompt.instruction.clone(),
            demos: node.prompt.demos.clone(),
        }
    }

    pub fn prompt(&self) -> Prompt {
        Prompt { instruction: self.instruction.clone(), demos: self.demos.clone() }
    }

    pub fn save_all(states: &[PromptState], path: impl AsRef<Path>) -> Result<(), NodeOptError> {
        std::fs::write(path, serde_json::to_string_pretty(states)? + "\n")?;
        Ok(())
    }

    pub fn load_all(path: impl AsRef<Path>) -> Result<Vec<PromptState>, NodeOptError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn apply_all(states: &[PromptState], graph: &mut CompositeGraph) -> Result<(), NodeOptError> {
        for s in states {
            let node = graph.node_mut(&s.node_id).ok_or_else(|| NodeOptError::UnknownNode(s.node_id.clone()))?;
            node.prompt = s.prompt();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::build_cot_chain;
    use crate::backends::{ExecutorError, ExecutorRequest};

    struct Const;

    impl Executor for Const {
        fn invoke(&self, _: &ExecutorRequest) -> Result<String, ExecutorError> {
            Ok("A".into())
        }
    }

    /// Appends a demo named after the node's current demo count.
    struct Counter;

    impl Improver for Counter {
        fn improve(&self, node: &Node, history: &[HistoryEntry], _: &mut ChaCha8Rng) -> Result<Prompt, NodeOptError> {
            let mut p = node.prompt.clone();
            p.demos.push(Demo::new(format!("after {}", history.len()), ""));
            Ok(p)
        }
    }

    fn problems(n: usize) -> Vec<Input> {
        (0..n).map(|i| Input::new(format!("p{i}"), "q")).collect()
    }

    #[test]
    fn no_problems_no_change() {
        let mut dag = build_cot_chain("c", 2).unwrap().to_dag();
        let before = dag.clone();
        let run = optimize_nodes(&mut dag, &[], &Const, &Counter, &|_, _| 1.0, &NodeOptConfig::default()).unwrap();
        assert_eq!(dag, before);
        assert!(run.updates.is_empty());
    }

    #[test]
    fn improver_runs_every_fourth_problem() {
        let mut dag = build_cot_chain("c", 2).unwrap().to_dag();
        let run =
            optimize_nodes(&mut dag, &problems(9), &Const, &Counter, &|_, _| 1.0, &NodeOptConfig::default()).unwrap();
        let after: Vec<usize> = run.updates.iter().map(|u| u.after_problem).collect();
        assert_eq!(after, [4, 4, 8, 8]);
        let demos: Vec<&str> =
            dag.node(&NodeId::new("c", "step0")).unwrap().prompt.demos.iter().map(|d| d.input.as_str()).collect();
        assert_eq!(demos, ["after 4", "after 8"]);
        assert_eq!(run.history.len(&NodeId::new("c", "step1")), 9);
    }

    #[test]
    fn execution_error_carries_problem_index() {
        struct Fails;
        impl Executor for Fails {
            fn invoke(&self, r: &ExecutorRequest) -> Result<String, ExecutorError> {
                if r.problem_id == "p2" {
                    Err(ExecutorError::Other("boom".into()))
                } else {
                    Ok("A".into())
                }
            }
        }
        let mut dag = build_cot_chain("c", 1).unwrap().to_dag();
        let err = optimize_nodes(&mut dag, &problems(4), &Fails, &Counter, &|_, _| 1.0, &NodeOptConfig::default());
        assert!(matches!(err, Err(NodeOptError::Execution { problem: 2, .. })));
    }

    #[test]
    fn node_rng_depends_only_on_node_and_round() {
        use rand::Rng;
        let a = NodeId::new("x", "a");
        let b = NodeId::new("x", "b");
        let draw = |id: &NodeId, r| node_rng(1, id, r).random::<u64>();
        assert_eq!(draw(&a, 0), draw(&a, 0));
        assert_ne!(draw(&a, 0), draw(&b, 0));
        assert_ne!(draw(&a, 0), draw(&a, 1));
    }

    #[test]
    fn prompt_state_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prompts.json");
        let node = Node::new(NodeId::new("a", "n"), crate::graph::Routine::llm(""))
            .with_prompt(Prompt::new("i").with_demos(vec![Demo::new("x", "y")]));
        let states = vec![PromptState::of(&node)];
        PromptState::save_all(&states, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"in\": \"x\""));
        assert_eq!(PromptState::load_all(&path).unwrap(), states);
    }
}
