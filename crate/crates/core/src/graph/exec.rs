use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::node::{join_solutions, split_solutions, FEEDBACK_TAG};
use super::{Dag, GraphError, Node, NodeId, Prompt, PureFunction, QueryStyle, Routine};
use crate::agents::{majority_vote, render_decision_request, DecisionStrategy};
use crate::backends::{render_request, Executor, ExecutorError, ExecutorRequest};

/// The graph input `x`, tagged with the problem it belongs to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Input {
    pub problem_id: String,
    pub text: String,
}

impl Input {
    pub fn new(problem_id: impl Into<String>, text: impl Into<String>) -> Self {
        Input { problem_id: problem_id.into(), text: text.into() }
    }
}

impl From<&str> for Input {
    fn from(text: &str) -> Self {
        Input::new("", text)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub producer: NodeId,
    pub output: String,
}

/// Outputs of a node's predecessors, ordered by the producers' topological
/// rank (which already breaks ties by id).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeContext {
    pub entries: Vec<ContextEntry>,
}

impl NodeContext {
    pub fn single(producer: NodeId, output: impl Into<String>) -> Self {
        NodeContext { entries: vec![ContextEntry { producer, output: output.into() }] }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn outputs(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.output.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node: NodeId,
    pub input: String,
    pub context: NodeContext,
    pub prompt: Prompt,
    pub output: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub problem_id: String,
    /// One record per node, in topological order.
    pub records: Vec<NodeRecord>,
    pub final_output: String,
}

impl ExecutionTrace {
    pub fn record(&self, id: &NodeId) -> Option<&NodeRecord> {
        self.records.iter().find(|r| r.node == *id)
    }
}

fn invoke(executor: &dyn Executor, node: &Node, request: &ExecutorRequest) -> Result<String, GraphError> {
    executor.invoke(request).map_err(|cause| match cause {
        ExecutorError::Unsupported => GraphError::UnresolvedRoutine(node.id.clone()),
        cause => GraphError::RoutineFailure { node: node.id.clone(), cause },
    })
}

/// Incoming solutions from every context entry, with feedback entries split
/// out. Each solution keeps its producer.
fn incoming(context: &NodeContext) -> (Vec<(NodeId, &str)>, Vec<&str>) {
    let mut solutions = Vec::new();
    let mut feedback = Vec::new();
    for entry in &context.entries {
        for s in split_solutions(&entry.output) {
            match s.strip_prefix(FEEDBACK_TAG) {
                Some(f) => feedback.push(f),
                None => solutions.push((entry.producer.clone(), s)),
            }
        }
    }
    (solutions, feedback)
}

/// Evaluates one node's routine on `(context, input)`.
pub fn evaluate_node(
    node: &Node,
    context: &NodeContext,
    input: &Input,
    executor: &dyn Executor,
) -> Result<String, GraphError> {
    match &node.routine {
        Routine::PureFunction { function } => Ok(match function {
            PureFunction::Identity => input.text.clone(),
            PureFunction::Concat => context.outputs().collect::<Vec<_>>().join("\n"),
            PureFunction::ForwardAll => {
                let (solutions, _) = incoming(context);
                join_solutions(&solutions.iter().map(|(_, s)| *s).collect::<Vec<_>>())
            }
        }),
        Routine::Decision { strategy } => {
            let answers: Vec<&str> = context
                .outputs()
                .flat_map(split_solutions)
                .filter(|o| !o.starts_with(FEEDBACK_TAG) && !o.trim().is_empty())
                .collect();
            if answers.is_empty() {
                // abstain
                return Ok(String::new());
            }
            match strategy {
                DecisionStrategy::MajorityVote { tie_break } => {
                    Ok(majority_vote(&answers, *tie_break).expect("answers are non-empty"))
                }
                _ => {
                    let request = render_decision_request(node, &answers, input);
                    invoke(executor, node, &request)
                }
            }
        }
        Routine::LlmQuery { style, .. } => match style {
            QueryStyle::Answer => invoke(executor, node, &render_request(node, context, input)),
            QueryStyle::Branch { branching } => {
                let (solutions, _) = incoming(context);
                let seeds: Vec<NodeContext> = if solutions.is_empty() {
                    vec![NodeContext::default()]
                } else {
                    solutions.into_iter().map(|(p, s)| NodeContext::single(p, s)).collect()
                };
                let b = u64::from(*branching);
                let mut out = Vec::new();
                for (i, ctx) in seeds.iter().enumerate() {
                    let base = render_request(node, ctx, input);
                    for j in 0..b {
                        let request = base.clone().with_nonce(i as u64 * b + j);
                        out.push(invoke(executor, node, &request)?);
                    }
                }
                Ok(join_solutions(&out))
            }
            QueryStyle::Critique => {
                let (solutions, _) = incoming(context);
                let feedback = invoke(executor, node, &render_request(node, context, input))?;
                let mut out: Vec<String> = solutions.into_iter().map(|(_, s)| s.to_string()).collect();
                out.push(format!("{FEEDBACK_TAG}{feedback}"));
                Ok(join_solutions(&out))
            }
            QueryStyle::Revise => {
                let (solutions, _) = incoming(context);
                let revised = invoke(executor, node, &render_request(node, context, input))?;
                let mut out: Vec<String> = solutions.into_iter().map(|(_, s)| s.to_string()).collect();
                out.push(revised);
                Ok(join_solutions(&out))
            }
        },
    }
}

fn context_for(
    dag: &Dag,
    rank: &BTreeMap<&NodeId, usize>,
    id: &NodeId,
    outputs: &BTreeMap<NodeId, String>,
) -> NodeContext {
    let mut preds = dag.predecessors(id);
    preds.sort_by_key(|p| (rank[p], *p));
    NodeContext {
        entries: preds.into_iter().map(|p| ContextEntry { producer: p.clone(), output: outputs[p].clone() }).collect(),
    }
}

fn finish(dag: &Dag, input: &Input, mut records: BTreeMap<NodeId, NodeRecord>) -> ExecutionTrace {
    let records: Vec<NodeRecord> = dag.order().iter().map(|id| records.remove(id).expect("every node ran")).collect();
    let final_output = records.iter().find(|r| r.node == *dag.output()).expect("output node").output.clone();
    ExecutionTrace { problem_id: input.problem_id.clone(), records, final_output }
}

/// Runs every node once in topological order and returns the trace.
///
/// The first failing node aborts the run.
pub fn execute(dag: &Dag, input: &Input, executor: &dyn Executor) -> Result<ExecutionTrace, GraphError> {
    let rank: BTreeMap<&NodeId, usize> = dag.order().iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut outputs = BTreeMap::new();
    let mut records = BTreeMap::new();
    for id in dag.order() {
        let node = dag.node(id).expect("order lists known nodes");
        let context = context_for(dag, &rank, id, &outputs);
        let output = evaluate_node(node, &context, input, executor)?;
        outputs.insert(id.clone(), output.clone());
        records.insert(
            id.clone(),
            NodeRecord { node: id.clone(), input: input.text.clone(), context, prompt: node.prompt.clone(), output },
        );
    }
    Ok(finish(dag, input, records))
}

/// Like [`execute`], but evaluates all nodes whose predecessors are done in
/// parallel. Produces the same trace as `execute` for a pure executor.
pub fn execute_concurrent(dag: &Dag, input: &Input, executor: &dyn Executor) -> Result<ExecutionTrace, GraphError> {
    let rank: BTreeMap<&NodeId, usize> = dag.order().iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut level: BTreeMap<&NodeId, usize> = BTreeMap::new();
    for id in dag.order() {
        let l = dag.predecessors(id).iter().map(|p| level[p] + 1).max().unwrap_or(0);
        level.insert(id, l);
    }
    let depth = level.values().copied().max().map_or(0, |d| d + 1);

    let mut outputs = BTreeMap::new();
    let mut records = BTreeMap::new();
    for l in 0..depth {
        let ready: Vec<&NodeId> = dag.order().iter().filter(|id| level[id] == l).collect();
        let done: Vec<Result<NodeRecord, GraphError>> = ready
            .par_iter()
            .map(|id| {
                let node = dag.node(id).expect("known node");
                let context = context_for(dag, &rank, id, &outputs);
                let output = evaluate_node(node, &context, input, executor)?;
                Ok(NodeRecord {
                    node: (*id).clone(),
                    input: input.text.clone(),
                    context,
                    prompt: node.prompt.clone(),
                    output,
                })
            })
            .collect();
        for record in done {
            let record = record?;
            outputs.insert(record.node.clone(), record.output.clone());
            records.insert(record.node.clone(), record);
        }
    }
    Ok(finish(dag, input, records))
}
