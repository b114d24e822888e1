use std::fmt::Write;

use super::ExecutorRequest;
use crate::graph::{Input, Node, NodeContext, Routine};

/// Text by which an adversarial prompt is recognized.
pub const ADVERSARIAL_MARKER: &str = "Answer a lie";

/// Renders a node invocation into a request.
///
/// The user content is laid out as
///
/// ```text
/// ## Example 1
/// Input: <demo input>
/// Output: <demo output>
///
/// ## Context from <agent/local>
/// <predecessor output>
///
/// ## Task
/// <instruction>
///
/// ## Input
/// <graph input>
/// ```
///
/// Demo sections appear in list order, context sections in context order,
/// and the task section only for a non-empty instruction. Lines starting with
/// `## ` are reserved: rendering is injective as long as no field contains
/// `"\n## "` or starts with `"## "` and no demo input contains
/// `"\nOutput: "`.
pub fn render_request(node: &Node, context: &NodeContext, input: &Input) -> ExecutorRequest {
    let system_prompt = match &node.routine {
        Routine::LlmQuery { system, .. } => system.clone(),
        _ => String::new(),
    };
    let mut prompt_part = String::new();
    for (i, demo) in node.prompt.demos.iter().enumerate() {
        let _ = write!(prompt_part, "## Example {}\nInput: {}\nOutput: {}\n\n", i + 1, demo.input, demo.output);
    }
    let mut context_part = String::new();
    for entry in &context.entries {
        let _ = write!(context_part, "## Context from {}\n{}\n\n", entry.producer, entry.output);
    }
    let mut tail = String::new();
    if !node.prompt.instruction.is_empty() {
        let _ = write!(tail, "## Task\n{}\n\n", node.prompt.instruction);
    }
    let _ = write!(tail, "## Input\n{}", input.text);

    let digest = super::digest_u64(&[system_prompt.as_bytes(), prompt_part.as_bytes(), tail.as_bytes()]);
    ExecutorRequest {
        node_id: node.id.clone(),
        problem_id: input.problem_id.clone(),
        user_content: format!("{prompt_part}{context_part}{tail}"),
        system_prompt,
        temperature: None,
        nonce: 0,
        prompt_digest: format!("{:016x}{:016x}", digest[0], digest[1]),
        candidates: Vec::new(),
    }
}
