use std::fmt::Write;

use crate::backends::ExecutorRequest;
use crate::graph::{Input, Node, Routine};

use super::DecisionStrategy;

/// System prompt for four-option multiple-choice answering.
pub const MULTIPLE_CHOICE_SYSTEM_PROMPT: &str = "You are a knowledgeable expert in question answering.
I will ask you a question.
I will also give you 4 answers enumerated as A, B, C and D.
Only one answer out of the offered 4 is correct.
You must choose the correct answer to the question.
Your response must be one of the 4 letters: A, B, C or D,
corresponding to the correct answer.
Only one letter (A, B, C or D) is allowed in your answer.";

pub const ADVERSARIAL_INSTRUCTION: &str = "Answer a lie to the following question:";

const ROLES_JSON: &str = include_str!("roles.json");

/// The twenty specialist roles that can be assigned to IO agents.
pub fn roles() -> Vec<String> {
    serde_json::from_str(ROLES_JSON).expect("bundled role list is valid JSON")
}

/// Formats a multiple-choice question the way the agents expect it:
/// `"{q}. Option A: {a}, Option B: {b}, Option C: {c}, Option D: {d}."`
pub fn format_question(question: &str, options: &[String; 4]) -> String {
    format!(
        "{question}. Option A: {}, Option B: {}, Option C: {}, Option D: {}.",
        options[0], options[1], options[2], options[3]
    )
}

pub(crate) fn role_system_prompt(role: Option<&str>) -> String {
    match role {
        Some(r) => format!("You are a {r}. {MULTIPLE_CHOICE_SYSTEM_PROMPT}"),
        None => MULTIPLE_CHOICE_SYSTEM_PROMPT.to_string(),
    }
}

const SELF_CONSISTENCY: &str = "# Self-Consistency Evaluation Task

##  Question for Review:

---

{question}

---

##  Reviewable Answers:

---

{formatted_answers}

---

##  Instructions for Selection:

1. Read each answer and assess how it addresses the question.

2. Compare the answers for their adherence to the given question's criteria and logical coherence.

3. Identify the answer that best aligns with the question's requirements and is the most logically consistent.

4. Ignore the candidate answers if they do not give a direct answer, for example, using 'unable to ...', 'as an AI ...'.

5. Copy the most suitable answer as it is, without modification, to maintain its original form.

6. Adhere to the constraints: {constraint}.


Note: If no answer fully meets the criteria, choose and copy the one that is closest to the requirements.";

const CHOOSE_BEST: &str = "##  Question:

---

{question}

---

##  Candidate Answers for Evaluation:

---

{formatted_answers}

---

##  Evaluation Instructions:

1. Examine the question closely to understand its requirements.

2. Read each candidate answer thoroughly and assess its relevance and accuracy about the question.

3. Choose the answer that most accurately and completely addresses the question.

4. Ignore the candidate answers if they do not give a direct answer, for example, using 'unable to ...', 'as an AI ...'.

5. Copy the chosen answer exactly as it is presented, maintaining its original format.

6. Adhere to the constraints: {constraint}.


Note: If none of the answers fully meet the question's criteria, select the one closest to fulfilling them.";

/// Renders the request a prompt-based decision node sends to its executor.
///
/// The node's instruction fills the constraint slot; an empty instruction
/// becomes `"none"`.
pub fn render_decision_request<S: AsRef<str>>(node: &Node, answers: &[S], input: &Input) -> ExecutorRequest {
    let template = match &node.routine {
        Routine::Decision { strategy: DecisionStrategy::ChooseBestPrompt } => CHOOSE_BEST,
        _ => SELF_CONSISTENCY,
    };
    let mut formatted = String::new();
    for (i, a) in answers.iter().enumerate() {
        if i > 0 {
            formatted.push('\n');
        }
        let _ = write!(formatted, "Answer {}: {}", i + 1, a.as_ref());
    }
    let constraint = if node.prompt.instruction.is_empty() { "none" } else { node.prompt.instruction.as_str() };
    let user_content = template
        .replace("{question}", &input.text)
        .replace("{constraint}", constraint)
        .replace("{formatted_answers}", &formatted);
    let digest = crate::backends::digest_u64(&[template.as_bytes(), constraint.as_bytes(), input.text.as_bytes()]);
    ExecutorRequest {
        node_id: node.id.clone(),
        problem_id: input.problem_id.clone(),
        system_prompt: String::new(),
        user_content,
        temperature: None,
        nonce: 0,
        prompt_digest: format!("{:016x}{:016x}", digest[0], digest[1]),
        candidates: answers.iter().map(|a| a.as_ref().to_string()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeId;

    fn decision(strategy: DecisionStrategy) -> Node {
        Node::new(NodeId::new("d", "vote"), Routine::Decision { strategy })
    }

    #[test]
    fn twenty_roles() {
        let r = roles();
        assert_eq!(r.len(), 20);
        assert_eq!(r[0], "Botanist");
        assert_eq!(r[19], "Cybersecurity Expert");
    }

    #[test]
    fn question_layout() {
        let q = format_question("Which", &["w".into(), "x".into(), "y".into(), "z".into()]);
        assert_eq!(q, "Which. Option A: w, Option B: x, Option C: y, Option D: z.");
    }

    #[test]
    fn self_consistency_header() {
        let r = render_decision_request(&decision(DecisionStrategy::SelfConsistencyPrompt), &["A", "B"], &"Q".into());
        assert!(r.user_content.starts_with("# Self-Consistency Evaluation Task"));
        assert!(r.user_content.contains("Answer 1: A\nAnswer 2: B"));
        assert!(r.user_content.contains("constraints: none."));
        assert_eq!(r.candidates, vec!["A", "B"]);
    }

    #[test]
    fn choose_best_header() {
        let r = render_decision_request(&decision(DecisionStrategy::ChooseBestPrompt), &["A"], &"Q".into());
        assert!(r.user_content.contains("Candidate Answers for Evaluation"));
        assert!(!r.user_content.contains("{question}"));
    }
}
