use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{HistoryEntry, NodeOptConfig, NodeOptError};
use crate::backends::Executor;
use crate::graph::{evaluate_node, Demo, Input, Node, Prompt};

/// Scores a node's routine, run under a candidate prompt, on a stored
/// invocation. The stored context is reused as-is.
pub trait ReplayScorer: Sync {
    fn score(
        &self,
        node: &Node,
        prompt: &Prompt,
        entry: &HistoryEntry,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64, NodeOptError>;
}

/// Replays through an executor and scores the output with `check`.
pub struct ExecutorReplay<'a, F> {
    pub executor: &'a dyn Executor,
    pub check: F,
}

impl<'a, F> ExecutorReplay<'a, F>
where
    F: Fn(&HistoryEntry, &str) -> f64 + Sync,
{
    pub fn new(executor: &'a dyn Executor, check: F) -> Self {
        ExecutorReplay { executor, check }
    }
}

impl<F> ReplayScorer for ExecutorReplay<'_, F>
where
    F: Fn(&HistoryEntry, &str) -> f64 + Sync,
{
    fn score(
        &self,
        node: &Node,
        prompt: &Prompt,
        entry: &HistoryEntry,
        _: &mut ChaCha8Rng,
    ) -> Result<f64, NodeOptError> {
        let candidate = node.clone().with_prompt(prompt.clone());
        let input = Input::new(entry.problem_id.clone(), entry.input.clone());
        let output = evaluate_node(&candidate, &entry.context, &input, self.executor).map_err(|e| {
            match std::error::Error::source(&e) {
                Some(cause) => NodeOptError::ReplayFailure(format!("{e}: {cause}")),
                None => NodeOptError::ReplayFailure(e.to_string()),
            }
        })?;
        Ok((self.check)(entry, &output))
    }
}

/// Maps a node's history and current prompt to a new prompt.
pub trait Improver: Sync {
    fn improve(&self, node: &Node, history: &[HistoryEntry], rng: &mut ChaCha8Rng) -> Result<Prompt, NodeOptError>;
}

fn push_unique(pool: &mut Vec<Demo>, demo: Demo) {
    if !pool.contains(&demo) {
        pool.push(demo);
    }
}

/// Positive examples from the entries of the last `problems` distinct
/// problem ids.
fn recent_positives(history: &[HistoryEntry], problems: usize, threshold: f64) -> Vec<Demo> {
    let mut ids: Vec<&str> = Vec::new();
    let mut start = history.len();
    for (i, e) in history.iter().enumerate().rev() {
        if !ids.contains(&e.problem_id.as_str()) {
            if ids.len() == problems {
                break;
            }
            ids.push(&e.problem_id);
        }
        start = i;
    }
    let mut out = Vec::new();
    for e in &history[start..] {
        if e.is_positive(threshold) {
            push_unique(&mut out, e.as_demo());
        }
    }
    out
}

fn replay_sum(
    scorer: &dyn ReplayScorer,
    node: &Node,
    prompt: &Prompt,
    window: &[HistoryEntry],
    rng: &mut ChaCha8Rng,
) -> Result<f64, NodeOptError> {
    let mut total = 0.0;
    for e in window {
        total += scorer.score(node, prompt, e, rng)?;
    }
    Ok(total)
}

/// Compares the current demos against a resampled pool of current demos and
/// recent positive examples, and keeps whichever scores higher when replayed
/// on the node's most recent inputs. Ties keep the current prompt.
pub fn greedy_demo_improver(
    node: &Node,
    history: &[HistoryEntry],
    scorer: &dyn ReplayScorer,
    config: &NodeOptConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Prompt, NodeOptError> {
    let current = node.prompt.clone();
    if history.is_empty() {
        return Ok(current);
    }
    let mut pool: Vec<Demo> = Vec::new();
    for d in &current.demos {
        push_unique(&mut pool, d.clone());
    }
    for d in recent_positives(history, config.update_every, config.positive_threshold) {
        push_unique(&mut pool, d);
    }
    if pool.is_empty() {
        return Ok(current);
    }
    let demos = if pool.len() <= config.max_demos {
        pool
    } else {
        let mut picked = index::sample(rng, pool.len(), config.max_demos).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| pool[i].clone()).collect()
    };
    let candidate = Prompt { instruction: current.instruction.clone(), demos };
    if candidate == current {
        return Ok(current);
    }
    let window = &history[history.len().saturating_sub(config.replay_window)..];
    let s1 = replay_sum(scorer, node, &current, window, rng)?;
    let s2 = replay_sum(scorer, node, &candidate, window, rng)?;
    Ok(if s2 > s1 { candidate } else { current })
}

/// UCB1 bandit state.
#[derive(Clone, Debug, PartialEq)]
pub struct Ucb1 {
    counts: Vec<u64>,
    sums: Vec<f64>,
}

impl Ucb1 {
    pub fn new(arms: usize) -> Self {
        Ucb1 { counts: vec![0; arms], sums: vec![0.0; arms] }
    }

    pub fn arms(&self) -> usize {
        self.counts.len()
    }

    pub fn plays(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, arm: usize) -> u64 {
        self.counts[arm]
    }

    pub fn mean(&self, arm: usize) -> Option<f64> {
        (self.counts[arm] > 0).then(|| self.sums[arm] / self.counts[arm] as f64)
    }

    /// `mean + √(2 ln t / n)` with `t` the total number of plays so far;
    /// infinite for an unplayed arm.
    pub fn index(&self, arm: usize) -> f64 {
        match self.mean(arm) {
            None => f64::INFINITY,
            Some(mean) => mean + (2.0 * (self.plays() as f64).ln() / self.counts[arm] as f64).sqrt(),
        }
    }

    /// Next arm to play: the first unplayed arm, else the highest index
    /// (lowest arm on ties).
    pub fn select(&self) -> usize {
        if let Some(arm) = self.counts.iter().position(|&c| c == 0) {
            return arm;
        }
        let mut best = 0;
        for arm in 1..self.arms() {
            if self.index(arm) > self.index(best) {
                best = arm;
            }
        }
        best
    }

    pub fn update(&mut self, arm: usize, reward: f64) {
        self.counts[arm] += 1;
        self.sums[arm] += reward;
    }

    /// Played arm with the highest mean (lowest arm on ties).
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for arm in 0..self.arms() {
            if let Some(m) = self.mean(arm) {
                if best.is_none_or(|(_, bm)| m > bm) {
                    best = Some((arm, m));
                }
            }
        }
        best.map(|(a, _)| a)
    }
}

/// Arms for [`ucb1_demo_improver`]: arm 0 keeps the prompt, arm `i` uses
/// the instruction with the single demo `i`.
pub fn ucb1_arms(node: &Node, history: &[HistoryEntry], threshold: f64) -> Vec<Prompt> {
    let mut demos = Vec::new();
    for e in history.iter().filter(|e| e.is_positive(threshold)) {
        push_unique(&mut demos, e.as_demo());
    }
    let mut arms = vec![node.prompt.clone()];
    arms.extend(demos.into_iter().map(|d| Prompt { instruction: node.prompt.instruction.clone(), demos: vec![d] }));
    arms
}

/// Chooses between "no change" and each single positive demonstration from
/// history with UCB1, replaying one random recent input per round.
pub fn ucb1_demo_improver(
    node: &Node,
    history: &[HistoryEntry],
    scorer: &dyn ReplayScorer,
    config: &NodeOptConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Prompt, NodeOptError> {
    if history.is_empty() {
        return Ok(node.prompt.clone());
    }
    let arms = ucb1_arms(node, history, config.positive_threshold);
    let window = &history[history.len().saturating_sub(config.replay_window)..];
    let mut bandit = Ucb1::new(arms.len());
    for _ in 0..config.ucb_iterations {
        let arm = bandit.select();
        let entry = &window[rng.random_range(0..window.len())];
        let reward = scorer.score(node, &arms[arm], entry, rng)?;
        bandit.update(arm, reward);
    }
    Ok(bandit.best().map_or_else(|| node.prompt.clone(), |a| arms[a].clone()))
}

/// [`greedy_demo_improver`] as an [`Improver`].
pub struct GreedyDemoImprover<'a> {
    pub scorer: &'a dyn ReplayScorer,
    pub config: NodeOptConfig,
}

impl Improver for GreedyDemoImprover<'_> {
    fn improve(&self, node: &Node, history: &[HistoryEntry], rng: &mut ChaCha8Rng) -> Result<Prompt, NodeOptError> {
        greedy_demo_improver(node, history, self.scorer, &self.config, rng)
    }
}

/// [`ucb1_demo_improver`] as an [`Improver`].
pub struct Ucb1DemoImprover<'a> {
    pub scorer: &'a dyn ReplayScorer,
    pub config: NodeOptConfig,
}

impl Improver for Ucb1DemoImprover<'_> {
    fn improve(&self, node: &Node, history: &[HistoryEntry], rng: &mut ChaCha8Rng) -> Result<Prompt, NodeOptError> {
        ucb1_demo_improver(node, history, self.scorer, &self.config, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeContext, NodeId, Routine};
    use rand::SeedableRng;

    fn node() -> Node {
        Node::new(NodeId::new("a", "n"), Routine::llm("")).with_description("answers")
    }

    fn entry(problem: &str, input: &str, score: f64) -> HistoryEntry {
        HistoryEntry {
            problem_id: problem.into(),
            input: input.into(),
            context: NodeContext::default(),
            output: format!("ans-{input}"),
            score: Some(score),
        }
    }

    /// Scores 1 whenever the prompt holds a demo with input `good`.
    struct Likes(&'static str);

    impl ReplayScorer for Likes {
        fn score(&self, _: &Node, p: &Prompt, _: &HistoryEntry, _: &mut ChaCha8Rng) -> Result<f64, NodeOptError> {
            Ok(if p.demos.iter().any(|d| d.input == self.0) { 1.0 } else { 0.0 })
        }
    }

    struct Flat;

    impl ReplayScorer for Flat {
        fn score(&self, _: &Node, _: &Prompt, _: &HistoryEntry, _: &mut ChaCha8Rng) -> Result<f64, NodeOptError> {
            Ok(0.5)
        }
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    #[test]
    fn empty_history_is_identity() {
        let cfg = NodeOptConfig::default();
        let n = node().with_prompt(Prompt::new("keep"));
        assert_eq!(greedy_demo_improver(&n, &[], &Flat, &cfg, &mut rng()).unwrap(), n.prompt);
        assert_eq!(ucb1_demo_improver(&n, &[], &Flat, &cfg, &mut rng()).unwrap(), n.prompt);
    }

    #[test]
    fn greedy_without_pool_keeps_prompt() {
        let h = vec![entry("p1", "x", 0.0), entry("p2", "y", 0.0)];
        let n = node();
        assert_eq!(greedy_demo_improver(&n, &h, &Likes("x"), &NodeOptConfig::default(), &mut rng()).unwrap(), n.prompt);
    }

    #[test]
    fn greedy_adopts_dominating_candidate() {
        let h = vec![entry("p1", "good", 1.0), entry("p2", "y", 0.0)];
        let p = greedy_demo_improver(&node(), &h, &Likes("good"), &NodeOptConfig::default(), &mut rng()).unwrap();
        assert_eq!(p.demos, vec![Demo::new("good", "ans-good")]);
    }

    #[test]
    fn greedy_tie_keeps_current() {
        let h = vec![entry("p1", "good", 1.0)];
        assert_eq!(
            greedy_demo_improver(&node(), &h, &Flat, &NodeOptConfig::default(), &mut rng()).unwrap(),
            Prompt::default()
        );
    }

    #[test]
    fn greedy_only_uses_recent_problems() {
        let mut h = vec![entry("old", "good", 1.0)];
        for i in 0..4 {
            h.push(entry(&format!("p{i}"), "y", 0.0));
        }
        let p = greedy_demo_improver(&node(), &h, &Likes("good"), &NodeOptConfig::default(), &mut rng()).unwrap();
        assert!(p.demos.is_empty());
    }

    #[test]
    fn greedy_pool_respects_max_demos() {
        let h: Vec<HistoryEntry> = (0..4).map(|i| entry(&format!("p{i}"), &format!("x{i}"), 1.0)).collect();
        let cfg = NodeOptConfig { max_demos: 2, ..Default::default() };
        struct More;
        impl ReplayScorer for More {
            fn score(&self, _: &Node, p: &Prompt, _: &HistoryEntry, _: &mut ChaCha8Rng) -> Result<f64, NodeOptError> {
                Ok(p.demos.len() as f64)
            }
        }
        let p = greedy_demo_improver(&node(), &h, &More, &cfg, &mut rng()).unwrap();
        assert_eq!(p.demos.len(), 2);
        assert_ne!(p.demos[0], p.demos[1]);
    }

    #[test]
    fn ucb_index_by_hand() {
        let mut b = Ucb1::new(2);
        assert_eq!(b.select(), 0);
        b.update(0, 1.0);
        assert_eq!(b.select(), 1);
        b.update(1, 0.0);
        b.update(0, 0.0);
        // t = 3; arm 0: mean 0.5, n = 2; arm 1: mean 0, n = 1
        let t = 3f64;
        assert!((b.index(0) - (0.5 + (2.0 * t.ln() / 2.0).sqrt())).abs() <= 1e-12);
        assert!((b.index(1) - (2.0 * t.ln()).sqrt()).abs() <= 1e-12);
        assert_eq!(b.select(), 0);
        assert_eq!(b.best(), Some(0));
    }

    #[test]
    fn ucb_single_arm() {
        let h = vec![entry("p1", "x", 0.0)];
        let cfg = NodeOptConfig { ucb_iterations: 7, ..Default::default() };
        let n = node().with_prompt(Prompt::new("i"));
        assert_eq!(ucb1_demo_improver(&n, &h, &Flat, &cfg, &mut rng()).unwrap(), n.prompt);
    }

    #[test]
    fn ucb_deterministic_arms() {
        let h = vec![entry("p1", "good", 1.0)];
        let p = ucb1_demo_improver(&node(), &h, &Likes("good"), &NodeOptConfig::default(), &mut rng()).unwrap();
        assert_eq!(p.demos, vec![Demo::new("good", "ans-good")]);
    }
}
