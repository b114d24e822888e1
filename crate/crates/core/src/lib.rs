//! Language agents as computational graphs.
//!
//! * [`graph`]: nodes, agent graphs, composite swarms and their execution.
//! * [`agents`]: ready-made agents and decision nodes.
//! * [`backends`]: executors that answer LLM-backed nodes.
//! * [`dist`]: the edge distribution over swarm connectivity.
//! * [`reinforce`]: policy-gradient edge optimization.
//! * [`nodeopt`]: history-driven prompt improvement.
//! * [`harness`]: synthetic tasks and the adversarial-swarm experiment.

pub mod agents;
pub mod backends;
pub mod dist;
pub mod graph;
pub mod harness;
pub mod nodeopt;
pub mod reinforce;

pub use agents::{majority_vote, AgentTemplate, DecisionStrategy, TieBreak};
pub use backends::{
    Executor, ExecutorError, ExecutorRequest, HttpExecutor, HttpExecutorConfig, MockExecutor, MockPolicy,
};
pub use dist::{EdgeDistribution, GraphSample, Heatmap, ParamsFile};
pub use graph::{AgentGraph, CompositeGraph, Dag, Edge, GraphError, Input, Node, NodeId, Prompt, Routine};
pub use harness::{run_adversarial_experiment, EvalReport, ExperimentConfig, TaskInstance};
pub use nodeopt::{optimize_nodes, HistoryStore, Improver, NodeOptConfig};
pub use reinforce::{optimize_edges, AdamState, EdgeOptConfig, OptRunRecord};
