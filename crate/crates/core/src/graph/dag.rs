use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use super::{Edge, GraphError, Node, NodeId};

fn index_edges<'a>(
    nodes: &'a BTreeSet<NodeId>,
    edges: impl IntoIterator<Item = &'a Edge>,
) -> Result<(Vec<&'a NodeId>, Vec<Vec<usize>>), GraphError> {
    let ids: Vec<&NodeId> = nodes.iter().collect();
    let index: BTreeMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut succ = vec![Vec::new(); ids.len()];
    for edge in edges {
        let s = *index.get(edge.src()).ok_or_else(|| GraphError::UnknownNode(edge.src().clone()))?;
        let d = *index.get(edge.dst()).ok_or_else(|| GraphError::UnknownNode(edge.dst().clone()))?;
        succ[s].push(d);
    }
    Ok((ids, succ))
}

/// Returns whether `(nodes, edges)` has no directed cycle.
pub fn validate_dag<'a>(
    nodes: &'a BTreeSet<NodeId>,
    edges: impl IntoIterator<Item = &'a Edge>,
) -> Result<bool, GraphError> {
    let (_, succ) = index_edges(nodes, edges)?;
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; succ.len()];
    for root in 0..succ.len() {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some((v, next)) = stack.last_mut() {
            let v = *v;
            if let Some(&w) = succ[v].get(*next) {
                *next += 1;
                match state[w] {
                    0 => {
                        state[w] = 1;
                        stack.push((w, 0));
                    }
                    1 => return Ok(false),
                    _ => {}
                }
            } else {
                state[v] = 2;
                stack.pop();
            }
        }
    }
    Ok(true)
}

/// Kahn's algorithm; among ready nodes the smallest [`NodeId`] goes first.
pub fn topological_sort<'a>(
    nodes: &'a BTreeSet<NodeId>,
    edges: impl IntoIterator<Item = &'a Edge>,
) -> Result<Vec<NodeId>, GraphError> {
    let (ids, succ) = index_edges(nodes, edges)?;
    let mut indegree = vec![0usize; ids.len()];
    for targets in &succ {
        for &t in targets {
            indegree[t] += 1;
        }
    }
    // ids are sorted, so ordering by index is ordering by NodeId
    let mut ready: BinaryHeap<Reverse<usize>> = (0..ids.len()).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(ids.len());
    while let Some(Reverse(v)) = ready.pop() {
        order.push(ids[v].clone());
        for &w in &succ[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                ready.push(Reverse(w));
            }
        }
    }
    if order.len() != ids.len() {
        return Err(GraphError::CycleDetected);
    }
    Ok(order)
}

/// Incremental cycle check over a fixed node set addressed by index.
///
/// Used by the edge sampler: edges are added one at a time and each
/// candidate is tested against the graph built so far.
#[derive(Clone, Debug)]
pub struct CycleGuard {
    succ: Vec<Vec<usize>>,
    seen: Vec<u32>,
    epoch: u32,
    stack: Vec<usize>,
}

impl CycleGuard {
    pub fn new(num_nodes: usize) -> Self {
        CycleGuard { succ: vec![Vec::new(); num_nodes], seen: vec![0; num_nodes], epoch: 0, stack: Vec::new() }
    }

    /// Whether adding `src -> dst` would close a cycle.
    pub fn would_cycle(&mut self, src: usize, dst: usize) -> bool {
        if src == dst {
            return true;
        }
        self.epoch += 1;
        self.stack.clear();
        self.stack.push(dst);
        self.seen[dst] = self.epoch;
        while let Some(v) = self.stack.pop() {
            for &w in &self.succ[v] {
                if w == src {
                    return true;
                }
                if self.seen[w] != self.epoch {
                    self.seen[w] = self.epoch;
                    self.stack.push(w);
                }
            }
        }
        false
    }

    pub fn add(&mut self, src: usize, dst: usize) {
        self.succ[src].push(dst);
    }
}

/// A concrete, executable DAG with a designated output node.
#[derive(Clone, Debug, PartialEq)]
pub struct Dag {
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeSet<Edge>,
    output: NodeId,
    order: Vec<NodeId>,
}

impl Dag {
    pub fn new(
        nodes: impl IntoIterator<Item = Node>,
        edges: impl IntoIterator<Item = Edge>,
        output: NodeId,
    ) -> Result<Self, GraphError> {
        let mut map = BTreeMap::new();
        for node in nodes {
            let id = node.id.clone();
            if map.insert(id.clone(), node).is_some() {
                return Err(GraphError::DuplicateNode(id));
            }
        }
        if !map.contains_key(&output) {
            return Err(GraphError::UnknownNode(output));
        }
        let edges: BTreeSet<Edge> = edges.into_iter().collect();
        let ids: BTreeSet<NodeId> = map.keys().cloned().collect();
        let order = topological_sort(&ids, &edges)?;
        Ok(Dag { nodes: map, edges, output, order })
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn node_mut(&mut self, id: &NodeId) -> Option<&mut Node> {
        self.nodes.get_mut(id)
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn output(&self) -> &NodeId {
        &self.output
    }

    /// Topological order with NodeId tie-breaking.
    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn predecessors(&self, id: &NodeId) -> Vec<&NodeId> {
        self.edges.iter().filter(|e| e.dst() == id).map(Edge::src).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> NodeId {
        NodeId::new("g", s)
    }

    fn set(names: &[&str]) -> BTreeSet<NodeId> {
        names.iter().map(|n| id(n)).collect()
    }

    fn edges(pairs: &[(&str, &str)]) -> Vec<Edge> {
        pairs.iter().map(|(a, b)| Edge::new(id(a), id(b))).collect()
    }

    #[test]
    fn validate_examples() {
        assert!(validate_dag(&set(&["a", "b"]), &edges(&[("a", "b")])).unwrap());
        assert!(!validate_dag(&set(&["a", "b"]), &edges(&[("a", "b"), ("b", "a")])).unwrap());
        assert!(!validate_dag(&set(&["a", "b", "c"]), &edges(&[("a", "b"), ("b", "c"), ("c", "a")])).unwrap());
    }

    #[test]
    fn validate_unknown_node() {
        let err = validate_dag(&set(&["a"]), &edges(&[("a", "z")])).unwrap_err();
        assert!(matches!(err, GraphError::UnknownNode(n) if n == id("z")));
    }

    #[test]
    fn self_loop_is_cycle() {
        assert!(!validate_dag(&set(&["a"]), &edges(&[("a", "a")])).unwrap());
    }

    #[test]
    fn topo_examples() {
        let diamond = edges(&[("s", "m1"), ("s", "m2"), ("m1", "o"), ("m2", "o")]);
        let order = topological_sort(&set(&["s", "m1", "m2", "o"]), &diamond).unwrap();
        assert_eq!(order, vec![id("s"), id("m1"), id("m2"), id("o")]);

        assert_eq!(topological_sort(&set(&["o"]), &[]).unwrap(), vec![id("o")]);

        let chain = edges(&[("a", "b"), ("b", "c")]);
        assert_eq!(topological_sort(&set(&["c", "b", "a"]), &chain).unwrap(), vec![id("a"), id("b"), id("c")]);
    }

    #[test]
    fn topo_rejects_cycle() {
        let cyc = edges(&[("a", "b"), ("b", "a")]);
        assert!(matches!(topological_sort(&set(&["a", "b"]), &cyc), Err(GraphError::CycleDetected)));
    }

    #[test]
    fn cycle_guard_tracks_paths() {
        let mut g = CycleGuard::new(3);
        assert!(!g.would_cycle(0, 1));
        g.add(0, 1);
        assert!(!g.would_cycle(1, 2));
        g.add(1, 2);
        assert!(g.would_cycle(2, 0));
        assert!(g.would_cycle(1, 0));
        assert!(!g.would_cycle(0, 2));
        assert!(g.would_cycle(1, 1));
    }
}
