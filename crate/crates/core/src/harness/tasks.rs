use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agents::canonical_answer;
use crate::backends::{Executor, TaskTruth};
use crate::graph::{execute, CompositeGraph, GraphError, Input};

/// A synthetic multiple-choice question. `options` are the answer labels
/// (`A`, `B`, …) and `option_texts` what they stand for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub problem_id: String,
    pub question: String,
    pub options: Vec<String>,
    pub option_texts: Vec<String>,
    pub gold: String,
}

impl TaskInstance {
    /// `"{question}. Option A: {a}, Option B: {b}, …."`
    pub fn prompt_text(&self) -> String {
        let opts: Vec<String> =
            self.options.iter().zip(&self.option_texts).map(|(l, t)| format!("Option {l}: {t}")).collect();
        format!("{}. {}.", self.question, opts.join(", "))
    }

    pub fn input(&self) -> Input {
        Input::new(self.problem_id.clone(), self.prompt_text())
    }

    pub fn is_correct(&self, answer: &str) -> bool {
        canonical_answer(answer) == canonical_answer(&self.gold)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskParams {
    pub num_options: usize,
    pub count: usize,
    pub id_prefix: String,
}

impl Default for TaskParams {
    fn default() -> Self {
        TaskParams { num_options: 4, count: 153, id_prefix: "q".into() }
    }
}

pub fn option_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| char::from(b'A' + i as u8).to_string()).collect()
}

const SUBJECTS: [&str; 8] = ["river", "lantern", "glacier", "violin", "orchard", "comet", "harbor", "meadow"];
const TRAITS: [&str; 8] = ["oldest", "brightest", "heaviest", "quietest", "largest", "rarest", "coldest", "fastest"];

/// Deterministic synthetic questions; the gold label is uniform over the
/// options.
pub fn generate_tasks(params: &TaskParams, seed: u64) -> Result<Vec<TaskInstance>, HarnessError> {
    if params.num_options < 2 || params.num_options > 26 {
        return Err(HarnessError::Domain(format!("num_options must be in 2..=26, got {}", params.num_options)));
    }
    let labels = option_labels(params.num_options);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..params.count)
        .map(|i| {
            let subject = SUBJECTS.choose(&mut rng).expect("non-empty");
            let quality = TRAITS.choose(&mut rng).expect("non-empty");
            let option_texts =
                (0..params.num_options).map(|_| format!("{subject} #{}", rng.random_range(100..1000))).collect();
            let gold = labels[rng.random_range(0..params.num_options)].clone();
            TaskInstance {
                problem_id: format!("{}{i:04}", params.id_prefix),
                question: format!("Which {subject} is the {quality}"),
                options: labels.clone(),
                option_texts,
                gold,
            }
        })
        .collect())
}

pub fn task_truth<'a>(tasks: impl IntoIterator<Item = &'a TaskInstance>) -> TaskTruth {
    tasks.into_iter().map(|t| (t.problem_id.clone(), t.gold.clone())).collect()
}

/// Final answer of `graph` on every task, in task order.
pub fn answers(
    graph: &CompositeGraph,
    tasks: &[TaskInstance],
    executor: &dyn Executor,
) -> Result<Vec<String>, GraphError> {
    let dag = graph.to_dag();
    tasks.par_iter().map(|t| execute(&dag, &t.input(), executor).map(|trace| trace.final_output)).collect()
}

/// Fraction of tasks whose final answer matches the gold label.
pub fn accuracy_utility(
    graph: &CompositeGraph,
    tasks: &[TaskInstance],
    executor: &dyn Executor,
) -> Result<f64, HarnessError> {
    if tasks.is_empty() {
        return Err(HarnessError::Domain("no tasks to evaluate".into()));
    }
    let outs = answers(graph, tasks, executor)?;
    let correct = tasks.iter().zip(&outs).filter(|(t, a)| t.is_correct(a)).count();
    Ok(correct as f64 / tasks.len() as f64)
}
