use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::render::ADVERSARIAL_MARKER;
use super::{digest_u64, Executor, ExecutorError, ExecutorRequest};
use crate::agents::{majority_vote, TieBreak};

/// What identifies an "agent" when drawing the mock's random outcome.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawKey {
    /// Every node draws independently: hash of `(seed, node_id, problem_id, nonce)`.
    #[default]
    Node,
    /// Nodes prompted identically (same system prompt, demos, instruction and
    /// input) answer identically: hash of `(seed, prompt digest, problem_id, nonce)`.
    Prompt,
}

/// Desk-scale stand-in for an LLM answering multiple-choice questions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MockPolicy {
    pub truthful_accuracy: f64,
    pub adversarial_accuracy: f64,
    pub alphabet: Vec<String>,
    pub seed: u64,
    #[serde(default)]
    pub draw_key: DrawKey,
}

impl Default for MockPolicy {
    fn default() -> Self {
        MockPolicy {
            truthful_accuracy: 0.85,
            adversarial_accuracy: 0.0,
            alphabet: ["A", "B", "C", "D"].map(String::from).to_vec(),
            seed: 0,
            draw_key: DrawKey::Node,
        }
    }
}

/// Gold answer label per problem id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskTruth(pub BTreeMap<String, String>);

impl TaskTruth {
    pub fn insert(&mut self, problem_id: impl Into<String>, gold: impl Into<String>) {
        self.0.insert(problem_id.into(), gold.into());
    }

    pub fn get(&self, problem_id: &str) -> Option<&str> {
        self.0.get(problem_id).map(String::as_str)
    }
}

impl FromIterator<(String, String)> for TaskTruth {
    fn from_iter<T: IntoIterator<Item = (String, String)>>(iter: T) -> Self {
        TaskTruth(iter.into_iter().collect())
    }
}

/// Answers one request under `policy`.
///
/// A prompt carrying the adversarial marker answers correctly with
/// probability `adversarial_accuracy`, any other prompt with
/// `truthful_accuracy`; a wrong answer is uniform over the remaining labels.
/// Prompt-based decision requests return the majority of their candidates.
/// The outcome is a pure function of the seed, the draw key, the problem id
/// and the nonce.
pub fn mock_invoke(policy: &MockPolicy, request: &ExecutorRequest, truth: &TaskTruth) -> Result<String, ExecutorError> {
    if !request.candidates.is_empty() {
        return Ok(majority_vote(&request.candidates, TieBreak::Lexicographic).expect("non-empty"));
    }
    let gold = truth.get(&request.problem_id).ok_or_else(|| ExecutorError::MissingTruth(request.problem_id.clone()))?;
    let adversarial =
        request.user_content.contains(ADVERSARIAL_MARKER) || request.system_prompt.contains(ADVERSARIAL_MARKER);
    let p = if adversarial { policy.adversarial_accuracy } else { policy.truthful_accuracy };

    let node = request.node_id.to_string();
    let key = match policy.draw_key {
        DrawKey::Node => node.as_bytes(),
        DrawKey::Prompt => request.prompt_digest.as_bytes(),
    };
    let [h0, h1] =
        digest_u64(&[&policy.seed.to_le_bytes(), key, request.problem_id.as_bytes(), &request.nonce.to_le_bytes()]);
    let u = (h0 >> 11) as f64 / (1u64 << 53) as f64;
    if u < p {
        return Ok(gold.to_string());
    }
    let wrong: Vec<&String> = policy.alphabet.iter().filter(|a| a.as_str() != gold).collect();
    if wrong.is_empty() {
        return Ok(gold.to_string());
    }
    Ok(wrong[(h1 % wrong.len() as u64) as usize].clone())
}

#[derive(Clone, Debug)]
pub struct MockExecutor {
    pub policy: MockPolicy,
    pub truth: TaskTruth,
}

impl MockExecutor {
    pub fn new(policy: MockPolicy, truth: TaskTruth) -> Self {
        MockExecutor { policy, truth }
    }
}

impl Executor for MockExecutor {
    fn invoke(&self, request: &ExecutorRequest) -> Result<String, ExecutorError> {
        mock_invoke(&self.policy, request, &self.truth)
    }
}
