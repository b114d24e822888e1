use std::fmt::Write;

use rand_chacha::ChaCha8Rng;

use super::{HistoryEntry, Improver, NodeOptError};
use crate::backends::{Executor, ExecutorRequest};
use crate::graph::{Node, Prompt};

const REWRITE_SYSTEM: &str = "You improve instructions for one step of a language-model program. \
Reply with the new instruction only.";

/// Asks an LLM to rewrite a node's instruction from its description and
/// recent scored invocations. Demonstrations are left untouched.
pub struct LlmRewriteImprover<'a> {
    pub executor: &'a dyn Executor,
    /// How many of the most recent history entries to show.
    pub examples: usize,
}

impl LlmRewriteImprover<'_> {
    pub fn request(&self, node: &Node, history: &[HistoryEntry]) -> ExecutorRequest {
        let mut user = String::new();
        let _ = write!(
            user,
            "## Step description\n{}\n\n## Current instruction\n{}\n\n",
            node.description, node.prompt.instruction
        );
        let recent = &history[history.len().saturating_sub(self.examples)..];
        for (i, e) in recent.iter().enumerate() {
            let score = e.score.map_or_else(|| "unscored".to_string(), |s| s.to_string());
            let _ =
                write!(user, "## Example {}\nInput: {}\nOutput: {}\nScore: {}\n\n", i + 1, e.input, e.output, score);
        }
        user.push_str("Write an improved instruction for this step.");
        ExecutorRequest {
            node_id: node.id.clone(),
            problem_id: String::new(),
            system_prompt: REWRITE_SYSTEM.to_string(),
            user_content: user,
            temperature: None,
            nonce: 0,
            prompt_digest: String::new(),
            candidates: Vec::new(),
        }
    }
}

impl Improver for LlmRewriteImprover<'_> {
    fn improve(&self, node: &Node, history: &[HistoryEntry], _: &mut ChaCha8Rng) -> Result<Prompt, NodeOptError> {
        if history.is_empty() {
            return Ok(node.prompt.clone());
        }
        let reply = self
            .executor
            .invoke(&self.request(node, history))
            .map_err(|e| NodeOptError::ReplayFailure(e.to_string()))?;
        let instruction = reply.trim();
        if instruction.is_empty() {
            return Ok(node.prompt.clone());
        }
        Ok(Prompt { instruction: instruction.to_string(), demos: node.prompt.demos.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::ExecutorError;
    use crate::graph::{Demo, NodeContext, NodeId, Routine};
    use rand::SeedableRng;

    struct Echo;

    impl Executor for Echo {
        fn invoke(&self, r: &ExecutorRequest) -> Result<String, ExecutorError> {
            assert!(r.user_content.contains("Pay attention to data types."));
            Ok("  Return only the letter. \n".into())
        }
    }

    #[test]
    fn rewrites_instruction_keeps_demos() {
        let node = Node::new(NodeId::new("a", "n"), Routine::llm(""))
            .with_description("Pay attention to data types.")
            .with_prompt(Prompt::new("old").with_demos(vec![Demo::new("i", "o")]));
        let h = vec![HistoryEntry {
            problem_id: "p".into(),
            input: "q".into(),
            context: NodeContext::default(),
            output: "x".into(),
            score: Some(0.0),
        }];
        let imp = LlmRewriteImprover { executor: &Echo, examples: 5 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = imp.improve(&node, &h, &mut rng).unwrap();
        assert_eq!(p.instruction, "Return only the letter.");
        assert_eq!(p.demos, node.prompt.demos);
        assert_eq!(imp.improve(&node, &[], &mut rng).unwrap(), node.prompt);
    }
}
