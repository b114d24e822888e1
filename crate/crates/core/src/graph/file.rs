//! JSON graph definition files.
//!
//! ```json
//! {
//!   "agents": [
//!     {"id": "io0", "nodes": [{"id": "answer", "kind": "llm_query", "description": "...", "prompt": "..."}],
//!      "edges": [], "output": "answer"}
//!   ],
//!   "mandated_edges": [["io0/answer", "decision/vote"]],
//!   "output_agent": "decision"
//! }
//! ```
//!
//! Node and edge ids inside an agent are local; mandated edges use full
//! `agent/local` ids. Potential edges are derived with
//! [`CompositeGraph::compose`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AgentGraph, CompositeGraph, Edge, GraphError, Node, NodeId, Prompt, Routine};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub prompt: Prompt,
    #[serde(flatten)]
    pub routine: Routine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: String,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
    pub output: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub mandated_edges: Vec<Edge>,
    pub output_agent: String,
}

#[derive(Debug, thiserror::Error)]
pub enum GraphFileError {
    #[error("reading graph file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing graph file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl AgentSpec {
    pub fn to_agent(&self) -> Result<AgentGraph, GraphError> {
        let nid = |local: &str| NodeId::new(self.id.as_str(), local);
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node {
                id: nid(&n.id),
                description: n.description.clone(),
                prompt: n.prompt.clone(),
                routine: n.routine.clone(),
            })
            .collect();
        let edges = self.edges.iter().map(|(s, d)| Edge::new(nid(s), nid(d)));
        AgentGraph::new(self.id.clone(), nodes, edges, nid(&self.output))
    }

    pub fn from_agent(agent: &AgentGraph) -> Self {
        AgentSpec {
            id: agent.id().to_string(),
            nodes: agent
                .nodes()
                .iter()
                .map(|n| NodeSpec {
                    id: n.id.local().to_string(),
                    description: n.description.clone(),
                    prompt: n.prompt.clone(),
                    routine: n.routine.clone(),
                })
                .collect(),
            edges: agent.edges().iter().map(|e| (e.src().local().to_string(), e.dst().local().to_string())).collect(),
            output: agent.output().local().to_string(),
        }
    }
}

impl GraphFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraphFileError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_composite(&self) -> Result<CompositeGraph, GraphError> {
        let agents = self.agents.iter().map(AgentSpec::to_agent).collect::<Result<Vec<_>, _>>()?;
        let output_agent = agents
            .iter()
            .position(|a| a.id() == self.output_agent)
            .ok_or_else(|| GraphError::Invalid(format!("unknown output agent {:?}", self.output_agent)))?;
        CompositeGraph::compose(agents, output_agent, self.mandated_edges.iter().cloned())
    }

    pub fn from_composite(graph: &CompositeGraph) -> Self {
        GraphFile {
            agents: graph.agents().iter().map(AgentSpec::from_agent).collect(),
            mandated_edges: graph.mandated_edges().iter().cloned().collect(),
            output_agent: graph.output().agent().to_string(),
        }
    }
}
