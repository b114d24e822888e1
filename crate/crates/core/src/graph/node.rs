use serde::{Deserialize, Serialize};

use super::NodeId;
use crate::agents::DecisionStrategy;

/// Separates candidate solutions inside a single text payload (ASCII record
/// separator). Node outputs never contain it except as a delimiter.
pub const SOLUTION_DELIMITER: char = '\u{1e}';

/// Prefix marking a critic's feedback entry inside a multi-solution payload.
pub const FEEDBACK_TAG: &str = "\u{1f}feedback:";

/// Splits a payload into its solutions. An empty payload has no solutions.
pub fn split_solutions(payload: &str) -> Vec<&str> {
    if payload.is_empty() {
        return Vec::new();
    }
    payload.split(SOLUTION_DELIMITER).collect()
}

pub fn join_solutions<S: AsRef<str>>(solutions: &[S]) -> String {
    let mut out = String::new();
    for (i, s) in solutions.iter().enumerate() {
        if i > 0 {
            out.push(SOLUTION_DELIMITER);
        }
        out.push_str(s.as_ref());
    }
    out
}

/// One demonstration shown inside a prompt.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Demo {
    #[serde(rename = "in")]
    pub input: String,
    #[serde(rename = "out")]
    pub output: String,
}

impl Demo {
    pub fn new(input: impl Into<String>, output: impl Into<String>) -> Self {
        Demo { input: input.into(), output: output.into() }
    }
}

/// A node prompt: an instruction plus an ordered list of demonstrations.
///
/// Deserializes from either a bare string (instruction only) or an object
/// `{instruction, demos}`; always serializes as the object form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "PromptRepr")]
pub struct Prompt {
    pub instruction: String,
    #[serde(default)]
    pub demos: Vec<Demo>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PromptRepr {
    Text(String),
    Full {
        #[serde(default)]
        instruction: String,
        #[serde(default)]
        demos: Vec<Demo>,
    },
}

impl From<PromptRepr> for Prompt {
    fn from(repr: PromptRepr) -> Self {
        match repr {
            PromptRepr::Text(instruction) => Prompt { instruction, demos: Vec::new() },
            PromptRepr::Full { instruction, demos } => Prompt { instruction, demos },
        }
    }
}

impl Prompt {
    pub fn new(instruction: impl Into<String>) -> Self {
        Prompt { instruction: instruction.into(), demos: Vec::new() }
    }

    pub fn with_demos(mut self, demos: Vec<Demo>) -> Self {
        self.demos = demos;
        self
    }
}

/// How an `llm_query` node turns its context into output.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum QueryStyle {
    /// One query, one answer.
    #[default]
    Answer,
    /// For every incoming solution (or the bare input when there is none),
    /// query `branching` times and emit every result.
    Branch { branching: u32 },
    /// Forward incoming solutions and append one feedback entry.
    Critique,
    /// Forward incoming solutions (dropping feedback) and append one revised
    /// solution produced with the feedback in context.
    Revise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PureFunction {
    /// Returns the graph input unchanged.
    Identity,
    /// Joins predecessor outputs with newlines, in context order.
    Concat,
    /// Forwards every incoming solution as one multi-solution payload.
    ForwardAll,
}

/// The computational routine of a node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Routine {
    LlmQuery {
        #[serde(default)]
        system: String,
        #[serde(default)]
        style: QueryStyle,
    },
    PureFunction {
        function: PureFunction,
    },
    Decision {
        strategy: DecisionStrategy,
    },
}

impl Routine {
    pub fn llm(system: impl Into<String>) -> Self {
        Routine::LlmQuery { system: system.into(), style: QueryStyle::Answer }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Routine::LlmQuery { .. } => "llm_query",
            Routine::PureFunction { .. } => "pure_function",
            Routine::Decision { .. } => "decision",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    /// What the routine is meant to do; consumed by prompt improvers.
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub prompt: Prompt,
    #[serde(flatten)]
    pub routine: Routine,
}

impl Node {
    pub fn new(id: NodeId, routine: Routine) -> Self {
        Node { id, description: String::new(), prompt: Prompt::default(), routine }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn with_prompt(mut self, prompt: Prompt) -> Self {
        self.prompt = prompt;
        self
    }

    /// Whether node-level prompt optimization applies to this node.
    pub fn is_optimizable(&self) -> bool {
        matches!(self.routine, Routine::LlmQuery { .. }) && !self.description.trim().is_empty()
    }
}
