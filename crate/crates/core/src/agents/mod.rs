//! Agent builders and decision strategies.
//!
//! Each builder returns an [`AgentGraph`](crate::graph::AgentGraph) whose node
//! ids are `agent/<local>` with fixed local names, so the same arguments
//! always produce the same graph.

mod builders;
mod templates;
mod vote;

use serde::{Deserialize, Serialize};

pub use builders::{
    build_adversarial_agent, build_cot_chain, build_decision_agent, build_decision_node, build_io_agent,
    build_reflexion_agent, build_tot_chain, AgentTemplate,
};
pub use templates::{
    format_question, render_decision_request, roles, ADVERSARIAL_INSTRUCTION, MULTIPLE_CHOICE_SYSTEM_PROMPT,
};
pub use vote::{canonical_answer, majority_vote, TieBreak};

/// How a decision node turns its predecessors' answers into one answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DecisionStrategy {
    /// Pure vote; needs no executor.
    MajorityVote {
        #[serde(default)]
        tie_break: TieBreak,
    },
    /// Ask the executor to pick the most consistent answer.
    SelfConsistencyPrompt,
    /// Ask the executor to pick the best answer.
    ChooseBestPrompt,
}

impl Default for DecisionStrategy {
    fn default() -> Self {
        DecisionStrategy::MajorityVote { tie_break: TieBreak::default() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("cannot vote over an empty list of answers")]
    EmptyInput,
    #[error("invalid agent parameter: {0}")]
    Domain(String),
    #[error("agent template: {0}")]
    Template(String),
}
