use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NodeOptError;
use crate::graph::{Demo, ExecutionTrace, NodeContext, NodeId};

pub const DEFAULT_HISTORY_CAP: usize = 1000;

/// One past invocation of a node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub problem_id: String,
    pub input: String,
    pub context: NodeContext,
    pub output: String,
    #[serde(default)]
    pub score: Option<f64>,
}

impl HistoryEntry {
    pub fn is_positive(&self, threshold: f64) -> bool {
        self.score.is_some_and(|s| s >= threshold)
    }

    pub fn as_demo(&self) -> Demo {
        Demo::new(self.input.clone(), self.output.clone())
    }
}

/// On-disk form of one node's history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeHistory {
    pub node_id: NodeId,
    pub entries: Vec<HistoryEntry>,
}

/// Per-node invocation history, each node capped with FIFO eviction.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryStore {
    cap: usize,
    nodes: BTreeMap<NodeId, VecDeque<HistoryEntry>>,
}

impl Default for HistoryStore {
    fn default() -> Self {
        HistoryStore::new(DEFAULT_HISTORY_CAP)
    }
}

impl HistoryStore {
    pub fn new(cap: usize) -> Self {
        HistoryStore { cap: cap.max(1), nodes: BTreeMap::new() }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Appends one entry per node of `trace`. `scores` is looked up per node;
    /// nodes without a score get `None`.
    pub fn record(&mut self, trace: &ExecutionTrace, scores: &BTreeMap<NodeId, f64>) {
        for rec in &trace.records {
            self.push(
                rec.node.clone(),
                HistoryEntry {
                    problem_id: trace.problem_id.clone(),
                    input: rec.input.clone(),
                    context: rec.context.clone(),
                    output: rec.output.clone(),
                    score: scores.get(&rec.node).copied(),
                },
            );
        }
    }

    pub fn push(&mut self, node: NodeId, entry: HistoryEntry) {
        let q = self.nodes.entry(node).or_default();
        q.push_back(entry);
        while q.len() > self.cap {
            q.pop_front();
        }
    }

    /// Entries of `node`, oldest first.
    pub fn entries(&self, node: &NodeId) -> Vec<HistoryEntry> {
        self.nodes.get(node).map(|q| q.iter().cloned().collect()).unwrap_or_default()
    }

    pub fn len(&self, node: &NodeId) -> usize {
        self.nodes.get(node).map_or(0, VecDeque::len)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.values().all(VecDeque::is_empty)
    }

    pub fn snapshot(&self) -> Vec<NodeHistory> {
        self.nodes
            .iter()
            .map(|(id, q)| NodeHistory { node_id: id.clone(), entries: q.iter().cloned().collect() })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NodeOptError> {
        std::fs::write(path, serde_json::to_string_pretty(&self.snapshot())? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, cap: usize) -> Result<Self, NodeOptError> {
        let snapshot: Vec<NodeHistory> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let mut store = HistoryStore::new(cap);
        for h in snapshot {
            for e in h.entries {
                store.push(h.node_id.clone(), e);
            }
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeRecord, Prompt};

    fn trace(problem: &str, nodes: &[&str]) -> ExecutionTrace {
        ExecutionTrace {
            problem_id: problem.into(),
            records: nodes
                .iter()
                .map(|n| NodeRecord {
                    node: NodeId::new("a", *n),
                    input: "x".into(),
                    context: NodeContext::default(),
                    prompt: Prompt::default(),
                    output: format!("out-{n}"),
                })
                .collect(),
            final_output: String::new(),
        }
    }

    #[test]
    fn empty_trace_changes_nothing() {
        let mut s = HistoryStore::default();
        s.record(&trace("p", &[]), &BTreeMap::new());
        assert!(s.is_empty());
    }

    #[test]
    fn one_entry_per_node() {
        let mut s = HistoryStore::default();
        let scores = BTreeMap::from([(NodeId::new("a", "n1"), 1.0)]);
        s.record(&trace("p7", &["n0", "n1", "n2"]), &scores);
        for n in ["n0", "n1", "n2"] {
            let e = s.entries(&NodeId::new("a", n));
            assert_eq!(e.len(), 1);
            assert_eq!(e[0].problem_id, "p7");
        }
        assert_eq!(s.entries(&NodeId::new("a", "n1"))[0].score, Some(1.0));
        assert_eq!(s.entries(&NodeId::new("a", "n0"))[0].score, None);
    }

    #[test]
    fn fifo_eviction() {
        let mut s = HistoryStore::new(2);
        for p in ["p1", "p2", "p3"] {
            s.record(&trace(p, &["n"]), &BTreeMap::new());
        }
        let ids: Vec<String> = s.entries(&NodeId::new("a", "n")).into_iter().map(|e| e.problem_id).collect();
        assert_eq!(ids, ["p2", "p3"]);
    }

    #[test]
    fn snapshot_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.json");
        let mut s = HistoryStore::new(5);
        s.record(&trace("p", &["n0", "n1"]), &BTreeMap::from([(NodeId::new("a", "n0"), 0.5)]));
        s.save(&path).unwrap();
        assert_eq!(HistoryStore::load(&path, 5).unwrap(), s);
    }
}
