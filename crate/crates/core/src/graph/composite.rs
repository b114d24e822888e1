use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{validate_dag, AgentGraph, Dag, Edge, GraphError, Node, NodeId};

/// A swarm: agents, required edges (intra-agent plus mandated cross-agent
/// links), and the ordered list of potential cross-agent edges.
///
/// Potential edges are listed in canonical order (lexicographic on
/// `(src, dst)`); the edge distribution's product form depends on it.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeGraph {
    agents: Vec<AgentGraph>,
    nodes: Vec<NodeId>,
    index: BTreeMap<NodeId, usize>,
    mandated: BTreeSet<Edge>,
    required: BTreeSet<Edge>,
    potential: Vec<Edge>,
    output: NodeId,
}

impl CompositeGraph {
    /// Builds a swarm whose potential edges are every cross-agent ordered
    /// pair, minus required edges and minus edges leaving the output node.
    pub fn compose(
        agents: Vec<AgentGraph>,
        output_agent: usize,
        mandated: impl IntoIterator<Item = Edge>,
    ) -> Result<Self, GraphError> {
        let output = agents
            .get(output_agent)
            .ok_or_else(|| GraphError::Invalid(format!("output agent index {output_agent} out of range")))?
            .output()
            .clone();
        let mandated: BTreeSet<Edge> = mandated.into_iter().collect();
        let mut all: Vec<&NodeId> = agents.iter().flat_map(|a| a.nodes().iter().map(|n| &n.id)).collect();
        all.sort();
        let mut potential = Vec::new();
        for &src in &all {
            if *src == output {
                continue;
            }
            for &dst in &all {
                if src.agent() == dst.agent() {
                    continue;
                }
                let edge = Edge::new(src.clone(), dst.clone());
                if !mandated.contains(&edge) {
                    potential.push(edge);
                }
            }
        }
        Self::from_parts(agents, mandated, potential, output)
    }

    /// Builds a swarm with an explicit potential-edge list (kept in the given
    /// order after validation).
    pub fn from_parts(
        agents: Vec<AgentGraph>,
        mandated: impl IntoIterator<Item = Edge>,
        potential: Vec<Edge>,
        output: NodeId,
    ) -> Result<Self, GraphError> {
        if agents.is_empty() {
            return Err(GraphError::Invalid("a composite graph needs at least one agent".into()));
        }
        let mut seen_agents = BTreeSet::new();
        for agent in &agents {
            if !seen_agents.insert(agent.id().to_string()) {
                return Err(GraphError::DuplicateAgent(agent.id().to_string()));
            }
        }
        let mut nodes: Vec<NodeId> = agents.iter().flat_map(|a| a.nodes().iter().map(|n| n.id.clone())).collect();
        nodes.sort();
        let index: BTreeMap<NodeId, usize> = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        if !index.contains_key(&output) {
            return Err(GraphError::UnknownNode(output));
        }
        if !agents.iter().any(|a| *a.output() == output) {
            return Err(GraphError::Invalid(format!("{output} is not the output node of any agent")));
        }

        let mandated: BTreeSet<Edge> = mandated.into_iter().collect();
        for edge in &mandated {
            for end in [edge.src(), edge.dst()] {
                if !index.contains_key(end) {
                    return Err(GraphError::UnknownNode(end.clone()));
                }
            }
            if edge.src().agent() == edge.dst().agent() {
                return Err(GraphError::Invalid(format!("mandated edge {edge} is not cross-agent")));
            }
        }
        let mut required: BTreeSet<Edge> = agents.iter().flat_map(|a| a.edges().iter().cloned()).collect();
        required.extend(mandated.iter().cloned());
        if required.iter().any(|e| *e.src() == output) {
            return Err(GraphError::Invalid(format!("required edge leaves the output node {output}")));
        }
        let node_set: BTreeSet<NodeId> = nodes.iter().cloned().collect();
        if !validate_dag(&node_set, &required)? {
            return Err(GraphError::CycleDetected);
        }

        let mut seen = BTreeSet::new();
        for edge in &potential {
            for end in [edge.src(), edge.dst()] {
                if !index.contains_key(end) {
                    return Err(GraphError::UnknownNode(end.clone()));
                }
            }
            if edge.src().agent() == edge.dst().agent() {
                return Err(GraphError::Invalid(format!("potential edge {edge} is not cross-agent")));
            }
            if *edge.src() == output {
                return Err(GraphError::Invalid(format!("potential edge {edge} leaves the output node")));
            }
            if required.contains(edge) {
                return Err(GraphError::Invalid(format!("potential edge {edge} is already required")));
            }
            if !seen.insert(edge) {
                return Err(GraphError::Invalid(format!("duplicate potential edge {edge}")));
            }
        }

        Ok(CompositeGraph { agents, nodes, index, mandated, required, potential, output })
    }

    pub fn agents(&self) -> &[AgentGraph] {
        &self.agents
    }

    /// All node ids in canonical (sorted) order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node_index(&self, id: &NodeId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.agents.iter().find(|a| a.id() == id.agent()).and_then(|a| a.nodes().iter().find(|n| n.id == *id))
    }

    pub fn node_mut(&mut self, id: &NodeId) -> Option<&mut Node> {
        self.agents.iter_mut().find(|a| a.id() == id.agent()).and_then(|a| a.nodes_mut().find(|n| n.id == *id))
    }

    pub fn mandated_edges(&self) -> &BTreeSet<Edge> {
        &self.mandated
    }

    pub fn required_edges(&self) -> &BTreeSet<Edge> {
        &self.required
    }

    pub fn potential_edges(&self) -> &[Edge] {
        &self.potential
    }

    pub fn output(&self) -> &NodeId {
        &self.output
    }

    pub fn output_agent(&self) -> &AgentGraph {
        self.agents.iter().find(|a| a.id() == self.output.agent()).expect("validated")
    }

    /// The executable graph with required edges only.
    pub fn to_dag(&self) -> Dag {
        self.realized_dag(&[]).expect("required graph is acyclic")
    }

    /// The executable graph with required edges plus `realized`.
    pub fn realized_dag(&self, realized: &[Edge]) -> Result<Dag, GraphError> {
        let nodes = self.agents.iter().flat_map(|a| a.nodes().iter().cloned());
        let edges = self.required.iter().cloned().chain(realized.iter().cloned());
        Dag::new(nodes, edges, self.output.clone())
    }

    /// Fixes `realized` as required edges and removes every node without a
    /// directed path to the output node, together with its edges.
    ///
    /// Entries of `realized` that are already required are accepted, so
    /// pruning a pruned graph with the same edges is a no-op. The output
    /// agent always survives. Fails if an edge is neither potential nor
    /// required, or if the edges close a cycle.
    pub fn prune(&self, realized: &[Edge]) -> Result<CompositeGraph, GraphError> {
        if let Some(e) = realized.iter().find(|e| !self.required.contains(e) && !self.potential.contains(e)) {
            return Err(GraphError::Invalid(format!("realized edge {e} is neither potential nor required")));
        }
        self.realized_dag(realized)?;
        let realized: BTreeSet<&Edge> = realized.iter().filter(|e| !self.required.contains(e)).collect();
        let edges: Vec<&Edge> = self.required.iter().chain(realized.iter().copied()).collect();

        let mut reaches = BTreeSet::new();
        reaches.insert(self.output.clone());
        let mut queue = VecDeque::from([&self.output]);
        while let Some(v) = queue.pop_front() {
            for e in edges.iter().filter(|e| e.dst() == v) {
                if reaches.insert(e.src().clone()) {
                    queue.push_back(e.src());
                }
            }
        }

        let agents: Vec<AgentGraph> = self.agents.iter().filter_map(|a| a.restricted(&reaches)).collect();
        let keep = |e: &Edge| reaches.contains(e.src()) && reaches.contains(e.dst());
        let mandated: BTreeSet<Edge> =
            self.mandated.iter().chain(realized.iter().copied()).filter(|e| keep(e)).cloned().collect();
        let potential: Vec<Edge> =
            self.potential.iter().filter(|e| keep(e) && !realized.contains(e)).cloned().collect();
        let mut nodes: Vec<NodeId> = reaches.into_iter().collect();
        nodes.sort();
        let index = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let mut required: BTreeSet<Edge> = agents.iter().flat_map(|a| a.edges().iter().cloned()).collect();
        required.extend(mandated.iter().cloned());
        Ok(CompositeGraph { agents, nodes, index, mandated, required, potential, output: self.output.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{PureFunction, Routine};

    fn solo(agent: &str) -> AgentGraph {
        let id = NodeId::new(agent, "n");
        let node = Node::new(id.clone(), Routine::PureFunction { function: PureFunction::Identity });
        AgentGraph::new(agent, vec![node], [], id).unwrap()
    }

    fn n(agent: &str) -> NodeId {
        NodeId::new(agent, "n")
    }

    #[test]
    fn two_agents_exclude_output_source() {
        let c = CompositeGraph::compose(vec![solo("a"), solo("b")], 1, []).unwrap();
        assert_eq!(c.potential_edges(), &[Edge::new(n("a"), n("b"))]);
    }

    #[test]
    fn single_agent_has_no_potential_edges() {
        let c = CompositeGraph::compose(vec![solo("a")], 0, []).unwrap();
        assert!(c.potential_edges().is_empty());
    }

    #[test]
    fn mandated_decision_edges_leave_twelve() {
        let names = ["t0", "t1", "x0", "x1"];
        let mut agents: Vec<AgentGraph> = names.iter().map(|a| solo(a)).collect();
        agents.push(solo("dec"));
        let mandated: Vec<Edge> = names.iter().map(|a| Edge::new(n(a), n("dec"))).collect();
        let c = CompositeGraph::compose(agents, 4, mandated).unwrap();
        assert_eq!(c.potential_edges().len(), 12);
        assert!(c.potential_edges().windows(2).all(|w| w[0] < w[1]));
        assert!(c.potential_edges().iter().all(|e| e.dst().agent() != "dec"));
    }

    #[test]
    fn mandated_cycle_rejected() {
        let err = CompositeGraph::compose(
            vec![solo("a"), solo("b"), solo("o")],
            2,
            [Edge::new(n("a"), n("b")), Edge::new(n("b"), n("a"))],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::CycleDetected));
    }

    #[test]
    fn mandated_edge_from_output_rejected() {
        let err = CompositeGraph::compose(vec![solo("a"), solo("b")], 1, [Edge::new(n("b"), n("a"))]).unwrap_err();
        assert!(matches!(err, GraphError::Invalid(_)));
    }

    #[test]
    fn prune_without_edges_keeps_only_output_agent() {
        let c = CompositeGraph::compose(vec![solo("a"), solo("b"), solo("o")], 2, []).unwrap();
        let p = c.prune(&[]).unwrap();
        assert_eq!(p.nodes(), &[n("o")]);
        assert_eq!(p.agents().len(), 1);
        assert!(p.potential_edges().is_empty());
    }

    #[test]
    fn prune_all_edges_keeps_everything() {
        let c = CompositeGraph::compose(vec![solo("a"), solo("b"), solo("o")], 2, []).unwrap();
        // a->b, a->o, b->o is acyclic and reaches everything
        let all = [Edge::new(n("a"), n("b")), Edge::new(n("a"), n("o")), Edge::new(n("b"), n("o"))];
        let p = c.prune(&all).unwrap();
        assert_eq!(p.nodes(), c.nodes());
        assert_eq!(p.prune(&all).unwrap(), p);
    }

    #[test]
    fn prune_rejects_cycles_and_unknown_edges() {
        let c = CompositeGraph::compose(vec![solo("a"), solo("b"), solo("o")], 2, []).unwrap();
        let cycle = [Edge::new(n("a"), n("b")), Edge::new(n("b"), n("a"))];
        assert!(matches!(c.prune(&cycle), Err(GraphError::CycleDetected)));
        assert!(matches!(c.prune(&[Edge::new(n("o"), n("a"))]), Err(GraphError::Invalid(_))));
    }
}
