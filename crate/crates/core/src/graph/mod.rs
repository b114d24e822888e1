//! Nodes, agent graphs, composite graphs and their execution.
//!
//! An agent is a DAG of operation nodes with one designated output node. A
//! swarm is a [`CompositeGraph`]: the union of several agents plus a fixed,
//! ordered list of *potential* cross-agent edges whose inclusion is decided
//! by an [`crate::dist::EdgeDistribution`].

mod agent;
mod composite;
mod dag;
mod exec;
pub mod file;
mod node;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use agent::AgentGraph;
pub use composite::CompositeGraph;
pub use dag::{topological_sort, validate_dag, CycleGuard, Dag};
pub use exec::{
    evaluate_node, execute, execute_concurrent, ContextEntry, ExecutionTrace, Input, NodeContext, NodeRecord,
};
pub use node::{
    join_solutions, split_solutions, Demo, Node, Prompt, PureFunction, QueryStyle, Routine, FEEDBACK_TAG,
    SOLUTION_DELIMITER,
};

use crate::backends::ExecutorError;

/// Identifier of a node: the owning agent plus a local name.
///
/// Ordering is lexicographic on `(agent, local)`, which fixes every
/// tie-break in the crate (topological order, potential-edge order, context
/// order). Serialized as `"agent/local"`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    agent: String,
    local: String,
}

impl NodeId {
    pub fn new(agent: impl Into<String>, local: impl Into<String>) -> Self {
        let agent = agent.into();
        let local = local.into();
        debug_assert!(!agent.contains('/'), "agent id may not contain '/'");
        NodeId { agent, local }
    }

    pub fn agent(&self) -> &str {
        &self.agent
    }

    pub fn local(&self) -> &str {
        &self.local
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.agent, self.local)
    }
}

impl FromStr for NodeId {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('/') {
            Some((agent, local)) if !agent.is_empty() && !local.is_empty() => Ok(NodeId::new(agent, local)),
            _ => Err(GraphError::BadNodeId(s.to_string())),
        }
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A directed edge `src -> dst`. Serialized as `["src", "dst"]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge(pub NodeId, pub NodeId);

impl Edge {
    pub fn new(src: NodeId, dst: NodeId) -> Self {
        Edge(src, dst)
    }

    pub fn src(&self) -> &NodeId {
        &self.0
    }

    pub fn dst(&self) -> &NodeId {
        &self.1
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.0, self.1)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("edge references unknown node {0}")]
    UnknownNode(NodeId),
    #[error("graph contains a cycle")]
    CycleDetected,
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate agent id {0:?}")]
    DuplicateAgent(String),
    #[error("malformed node id {0:?}, expected \"agent/local\"")]
    BadNodeId(String),
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("routine of node {node} failed")]
    RoutineFailure {
        node: NodeId,
        #[source]
        cause: ExecutorError,
    },
    #[error("executor cannot resolve the routine of node {0}")]
    UnresolvedRoutine(NodeId),
}
