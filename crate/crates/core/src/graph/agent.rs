use std::collections::BTreeSet;

use super::{Dag, Edge, GraphError, Node, NodeId};

/// A single language agent: a DAG of nodes that all share one agent id.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentGraph {
    id: String,
    nodes: Vec<Node>,
    edges: BTreeSet<Edge>,
    output: NodeId,
}

impl AgentGraph {
    pub fn new(
        id: impl Into<String>,
        nodes: Vec<Node>,
        edges: impl IntoIterator<Item = Edge>,
        output: NodeId,
    ) -> Result<Self, GraphError> {
        let id = id.into();
        if id.is_empty() || id.contains('/') {
            return Err(GraphError::Invalid(format!("bad agent id {id:?}")));
        }
        let mut nodes = nodes;
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        for node in &nodes {
            if node.id.agent() != id {
                return Err(GraphError::Invalid(format!("node {} does not belong to agent {id:?}", node.id)));
            }
        }
        let edges: BTreeSet<Edge> = edges.into_iter().collect();
        // Dag::new checks duplicates, endpoints, output membership and acyclicity
        Dag::new(nodes.iter().cloned(), edges.iter().cloned(), output.clone())?;
        Ok(AgentGraph { id, nodes, edges, output })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Nodes sorted by id.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn nodes_mut(&mut self) -> impl Iterator<Item = &mut Node> {
        self.nodes.iter_mut()
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn output(&self) -> &NodeId {
        &self.output
    }

    pub fn to_dag(&self) -> Dag {
        Dag::new(self.nodes.iter().cloned(), self.edges.iter().cloned(), self.output.clone())
            .expect("validated at construction")
    }

    /// Keeps only `keep`; the output falls back to the last surviving node in
    /// topological order when the original output is dropped. Returns `None`
    /// when nothing survives.
    pub(crate) fn restricted(&self, keep: &BTreeSet<NodeId>) -> Option<AgentGraph> {
        let nodes: Vec<Node> = self.nodes.iter().filter(|n| keep.contains(&n.id)).cloned().collect();
        if nodes.is_empty() {
            return None;
        }
        let edges: BTreeSet<Edge> =
            self.edges.iter().filter(|e| keep.contains(e.src()) && keep.contains(e.dst())).cloned().collect();
        let output = if keep.contains(&self.output) {
            self.output.clone()
        } else {
            let order = self.to_dag().order().to_vec();
            order.into_iter().rev().find(|n| keep.contains(n)).expect("non-empty")
        };
        Some(AgentGraph { id: self.id.clone(), nodes, edges, output })
    }
}
