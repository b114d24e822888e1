use serde::{Deserialize, Serialize};

use crate::graph::{AgentGraph, Edge, Node, NodeId, Prompt, QueryStyle, Routine};

use super::templates::{role_system_prompt, ADVERSARIAL_INSTRUCTION};
use super::{AgentError, DecisionStrategy};

fn query(agent: &str, local: &str, system: String, style: QueryStyle, description: &str, instruction: &str) -> Node {
    Node::new(NodeId::new(agent, local), Routine::LlmQuery { system, style })
        .with_description(description)
        .with_prompt(Prompt::new(instruction))
}

fn chain(agent: &str, nodes: Vec<Node>) -> AgentGraph {
    let edges: Vec<Edge> = nodes.windows(2).map(|w| Edge::new(w[0].id.clone(), w[1].id.clone())).collect();
    let output = nodes.last().expect("chain has a node").id.clone();
    AgentGraph::new(agent, nodes, edges, output).expect("a chain is a valid agent graph")
}

/// Single node that answers the question directly; `role` prefixes the
/// system prompt.
pub fn build_io_agent(agent: &str, role: Option<&str>) -> AgentGraph {
    let node =
        query(agent, "answer", role_system_prompt(role), QueryStyle::Answer, "Answers the question directly.", "");
    chain(agent, vec![node])
}

/// Single node instructed to answer incorrectly.
pub fn build_adversarial_agent(agent: &str) -> AgentGraph {
    let node = query(
        agent,
        "answer",
        role_system_prompt(None),
        QueryStyle::Answer,
        "Answers the question with a lie.",
        ADVERSARIAL_INSTRUCTION,
    );
    chain(agent, vec![node])
}

/// Linear chain of `steps` reasoning nodes `step0 → step1 → …`.
pub fn build_cot_chain(agent: &str, steps: usize) -> Result<AgentGraph, AgentError> {
    if steps == 0 {
        return Err(AgentError::Domain("a chain of thought needs at least one step".into()));
    }
    let nodes = (0..steps)
        .map(|i| {
            let instruction = if i + 1 == steps {
                "Using the reasoning so far, give the final answer."
            } else {
                "Think step by step and extend the reasoning so far."
            };
            query(
                agent,
                &format!("step{i}"),
                role_system_prompt(None),
                QueryStyle::Answer,
                "One reasoning step of a chain of thought.",
                instruction,
            )
        })
        .collect();
    Ok(chain(agent, nodes))
}

/// Chain of `depth` branching nodes. Each node proposes `branching`
/// continuations of every incoming solution, so the payload after `k` nodes
/// holds `branching^k` solutions.
pub fn build_tot_chain(agent: &str, depth: usize, branching: u32) -> Result<AgentGraph, AgentError> {
    if depth == 0 {
        return Err(AgentError::Domain("tree depth must be at least 1".into()));
    }
    if branching < 2 {
        return Err(AgentError::Domain("branching factor must be at least 2".into()));
    }
    let nodes = (0..depth)
        .map(|i| {
            query(
                agent,
                &format!("branch{i}"),
                role_system_prompt(None),
                QueryStyle::Branch { branching },
                "Proposes alternative continuations of a partial solution.",
                "Propose a continuation of the partial solution.",
            )
        })
        .collect();
    Ok(chain(agent, nodes))
}

/// `propose → critique → revise`. The output carries the proposed and the
/// revised solution.
pub fn build_reflexion_agent(agent: &str) -> AgentGraph {
    let system = role_system_prompt(None);
    let nodes = vec![
        query(agent, "propose", system.clone(), QueryStyle::Answer, "Proposes a first solution.", ""),
        query(
            agent,
            "critique",
            system.clone(),
            QueryStyle::Critique,
            "Criticizes the proposed solution.",
            "Point out the mistakes in the proposed solution.",
        ),
        query(
            agent,
            "revise",
            system,
            QueryStyle::Revise,
            "Revises the solution using the critique.",
            "Give an improved solution that addresses the feedback.",
        ),
    ];
    chain(agent, nodes)
}

/// The node that aggregates a swarm's answers. Its local id is `vote`.
pub fn build_decision_node(agent: &str, strategy: DecisionStrategy) -> Node {
    let node = Node::new(NodeId::new(agent, "vote"), Routine::Decision { strategy });
    match strategy {
        DecisionStrategy::MajorityVote { .. } => node,
        _ => node.with_prompt(Prompt::new("Reply with the chosen answer only")),
    }
}

/// One-node agent wrapping [`build_decision_node`].
pub fn build_decision_agent(agent: &str, strategy: DecisionStrategy) -> AgentGraph {
    chain(agent, vec![build_decision_node(agent, strategy)])
}

/// Serializable agent recipe: `{"kind": "tot", "params": {"depth": 8}}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum AgentTemplate {
    Io {
        #[serde(default)]
        role: Option<String>,
    },
    Adversarial,
    Cot {
        steps: usize,
    },
    Tot {
        depth: usize,
        #[serde(default = "default_branching")]
        branching: u32,
    },
    Reflexion,
}

fn default_branching() -> u32 {
    2
}

impl AgentTemplate {
    pub fn build(&self, agent: &str) -> Result<AgentGraph, AgentError> {
        match self {
            AgentTemplate::Io { role } => Ok(build_io_agent(agent, role.as_deref())),
            AgentTemplate::Adversarial => Ok(build_adversarial_agent(agent)),
            AgentTemplate::Cot { steps } => build_cot_chain(agent, *steps),
            AgentTemplate::Tot { depth, branching } => build_tot_chain(agent, *depth, *branching),
            AgentTemplate::Reflexion => Ok(build_reflexion_agent(agent)),
        }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AgentError::Template(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| AgentError::Template(e.to_string()))
    }
}
