//! Synthetic tasks, utilities and the adversarial-swarm experiment.

mod tasks;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{build_decision_agent, AgentError, AgentTemplate, DecisionStrategy};
use crate::backends::{CountingExecutor, DrawKey, Executor, HttpExecutorConfig, MockExecutor, MockPolicy};
use crate::dist::{DistError, EdgeDistribution, ParamsFile, LOGIT_CAP};
use crate::graph::{execute, CompositeGraph, Edge, GraphError, NodeId};
use crate::nodeopt::{NodeOptConfig, NodeOptError};
use crate::reinforce::{optimize_edges, EdgeOptConfig, OptRunRecord, ReinforceError, UtilityError};

pub use tasks::{accuracy_utility, answers, generate_tasks, option_labels, task_truth, TaskInstance, TaskParams};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Reinforce(#[from] ReinforceError),
    #[error(transparent)]
    NodeOpt(#[from] NodeOptError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Derives an independent seed for one purpose from the experiment seed.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    crate::backends::digest_u64(&[&seed.to_le_bytes(), purpose.as_bytes()])[0]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSlot {
    pub template: AgentTemplate,
    #[serde(default = "one")]
    pub count: usize,
}

fn one() -> usize {
    1
}

/// Which agents make up the swarm and how their answers are combined.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmSpec {
    pub agents: Vec<AgentSlot>,
    pub decision: DecisionStrategy,
    /// Make every agent→decision edge required instead of optimizable.
    pub mandate_decision_edges: bool,
}

impl Default for SwarmSpec {
    fn default() -> Self {
        SwarmSpec::adversarial(2, 2)
    }
}

impl SwarmSpec {
    pub fn adversarial(truthful: usize, adversarial: usize) -> Self {
        SwarmSpec {
            agents: vec![
                AgentSlot { template: AgentTemplate::Io { role: None }, count: truthful },
                AgentSlot { template: AgentTemplate::Adversarial, count: adversarial },
            ],
            decision: DecisionStrategy::default(),
            mandate_decision_edges: false,
        }
    }

    fn prefix(template: &AgentTemplate) -> &'static str {
        match template {
            AgentTemplate::Io { .. } => "io",
            AgentTemplate::Adversarial => "adv",
            AgentTemplate::Cot { .. } => "cot",
            AgentTemplate::Tot { .. } => "tot",
            AgentTemplate::Reflexion => "reflexion",
        }
    }

    /// Agents named `<kind><n>` (`io0`, `io1`, `adv0`, …) plus a `decision`
    /// agent as the output.
    pub fn build(&self) -> Result<CompositeGraph, HarnessError> {
        let mut agents = Vec::new();
        let mut counters: std::collections::BTreeMap<&str, usize> = Default::default();
        for slot in &self.agents {
            let prefix = Self::prefix(&slot.template);
            for _ in 0..slot.count {
                let n = counters.entry(prefix).or_default();
                agents.push(slot.template.build(&format!("{prefix}{n}"))?);
                *n += 1;
            }
        }
        if agents.is_empty() {
            return Err(HarnessError::Config("the swarm has no agents".into()));
        }
        let decision = build_decision_agent("decision", self.decision);
        let mandated: Vec<Edge> = if self.mandate_decision_edges {
            agents.iter().map(|a| Edge::new(a.output().clone(), decision.output().clone())).collect()
        } else {
            Vec::new()
        };
        agents.push(decision);
        let output = agents.len() - 1;
        Ok(CompositeGraph::compose(agents, output, mandated)?)
    }

    /// The first IO agent on its own: the single-agent baseline. It keeps
    /// its swarm id so it draws the same mock answers as in the swarm.
    pub fn baseline(&self) -> Result<CompositeGraph, HarnessError> {
        let template = self
            .agents
            .iter()
            .find(|s| s.count > 0 && matches!(s.template, AgentTemplate::Io { .. }))
            .ok_or_else(|| HarnessError::Config("the swarm has no IO agent to serve as baseline".into()))?;
        let agent = template.template.build("io0")?;
        Ok(CompositeGraph::compose(vec![agent], 0, [])?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockSettings {
    pub truthful_accuracy: f64,
    pub adversarial_accuracy: f64,
    pub draw_key: DrawKey,
}

impl Default for MockSettings {
    fn default() -> Self {
        MockSettings { truthful_accuracy: 0.85, adversarial_accuracy: 0.0, draw_key: DrawKey::Prompt }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Drives task generation, mock draws, sampling and improvers.
    pub seed: u64,
    pub swarm: SwarmSpec,
    /// Graph definition file used instead of `swarm` by the graph commands.
    pub graph: Option<PathBuf>,
    pub mock: MockSettings,
    pub num_options: usize,
    pub optimization_tasks: usize,
    pub eval_tasks: usize,
    pub edge_opt: EdgeOptConfig,
    pub node_opt: NodeOptConfig,
    pub http: HttpExecutorConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            swarm: SwarmSpec::default(),
            graph: None,
            mock: MockSettings::default(),
            num_options: 4,
            optimization_tasks: 200,
            eval_tasks: 153,
            edge_opt: EdgeOptConfig::default(),
            node_opt: NodeOptConfig::default(),
            http: HttpExecutorConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.mock.truthful_accuracy) || !(0.0..=1.0).contains(&self.mock.adversarial_accuracy)
        {
            return bad("mock accuracies must lie in [0, 1]");
        }
        if !(2..=26).contains(&self.num_options) {
            return bad("num_options must be in 2..=26");
        }
        if self.optimization_tasks == 0 || self.eval_tasks == 0 {
            return bad("task counts must be at least 1");
        }
        self.edge_opt.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.node_opt.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    /// Optimization and evaluation tasks; ids are disjoint by prefix.
    pub fn tasks(&self) -> Result<(Vec<TaskInstance>, Vec<TaskInstance>), HarnessError> {
        let opt = generate_tasks(
            &TaskParams { num_options: self.num_options, count: self.optimization_tasks, id_prefix: "opt".into() },
            derive_seed(self.seed, "optimization-tasks"),
        )?;
        let eval = generate_tasks(
            &TaskParams { num_options: self.num_options, count: self.eval_tasks, id_prefix: "eval".into() },
            derive_seed(self.seed, "eval-tasks"),
        )?;
        Ok((opt, eval))
    }

    pub fn mock_executor(&self, tasks: &[&[TaskInstance]]) -> MockExecutor {
        let policy = MockPolicy {
            truthful_accuracy: self.mock.truthful_accuracy,
            adversarial_accuracy: self.mock.adversarial_accuracy,
            alphabet: option_labels(self.num_options),
            seed: derive_seed(self.seed, "mock"),
            draw_key: self.mock.draw_key,
        };
        MockExecutor::new(policy, task_truth(tasks.iter().flat_map(|t| t.iter())))
    }

    pub fn edge_opt_config(&self) -> EdgeOptConfig {
        EdgeOptConfig { seed: derive_seed(self.seed, "edge-opt"), ..self.edge_opt.clone() }
    }

    pub fn node_opt_config(&self) -> NodeOptConfig {
        NodeOptConfig { seed: derive_seed(self.seed, "node-opt"), ..self.node_opt.clone() }
    }
}

/// Estimates utility by running the graph on one randomly drawn task.
pub fn single_task_utility<'a>(
    tasks: &'a [TaskInstance],
    executor: &'a dyn Executor,
) -> impl Fn(&CompositeGraph, &mut ChaCha8Rng) -> Result<f64, UtilityError> + Sync + 'a {
    move |graph, rng| {
        let task = tasks.choose(rng).ok_or("no optimization tasks")?;
        let trace = execute(&graph.to_dag(), &task.input(), executor)?;
        Ok(if task.is_correct(&trace.final_output) { 1.0 } else { 0.0 })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub baseline: f64,
    pub full_graph: f64,
    pub random_graph: f64,
    pub optimized: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemOutcome {
    pub problem_id: String,
    pub gold: String,
    pub baseline: String,
    pub full_graph: String,
    pub random_graph: String,
    pub optimized: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub optimization: u64,
    pub evaluation: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub optimization_secs: f64,
    pub evaluation_secs: f64,
    pub total_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeProbability {
    pub src: NodeId,
    pub dst: NodeId,
    pub prob: f64,
}

/// Outcome of one experiment. Wall-clock time is kept out of the serialized
/// form so that reports from identical runs compare byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub agents: usize,
    pub potential_edges: usize,
    pub eval_tasks: usize,
    pub scores: Scores,
    pub full_graph_edges: Vec<Edge>,
    pub random_graph_edges: Vec<Edge>,
    pub optimized_edges: Vec<Edge>,
    /// Learned probability of every edge into the output node.
    pub output_edge_probs: Vec<EdgeProbability>,
    pub final_mean_utility: f64,
    pub calls: CallCounts,
    pub outcomes: Vec<ProblemOutcome>,
    #[serde(skip)]
    pub timing: Timing,
}

impl EvalReport {
    pub fn summary_csv(&self) -> String {
        let s = &self.scores;
        let mut out = String::from("graph,accuracy,delta_vs_baseline,edges\n");
        let rows = [
            ("baseline", s.baseline, 0),
            ("full_graph", s.full_graph, self.full_graph_edges.len()),
            ("random_graph", s.random_graph, self.random_graph_edges.len()),
            ("optimized", s.optimized, self.optimized_edges.len()),
        ];
        for (name, acc, edges) in rows {
            out.push_str(&format!("{name},{acc},{},{edges}\n", acc - s.baseline));
        }
        out
    }
}

pub struct ExperimentOutputs {
    pub report: EvalReport,
    pub composite: CompositeGraph,
    pub distribution: EdgeDistribution,
    pub record: OptRunRecord,
    pub params: ParamsFile,
}

impl ExperimentOutputs {
    /// Writes `report.json`, `report.csv`, `params.json`, `heatmap.csv`,
    /// `run.jsonl` and `timing.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&self.report)? + "\n")?;
        std::fs::write(dir.join("report.csv"), self.report.summary_csv())?;
        self.params.save(dir.join("params.json"))?;
        self.distribution.export_matrix(&self.composite).save_csv(dir.join("heatmap.csv"))?;
        self.record.save_jsonl(dir.join("run.jsonl"))?;
        std::fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&self.report.timing)? + "\n")?;
        Ok(())
    }
}

/// Optimizes the swarm's edges and compares, on held-out tasks, the single
/// truthful baseline, the full graph, a graph drawn at θ = 0.5 and the
/// optimized graph. `executor` defaults to the configured mock.
pub fn run_adversarial_experiment(
    config: &ExperimentConfig,
    executor: Option<&dyn Executor>,
) -> Result<ExperimentOutputs, HarnessError> {
    config.validate()?;
    let start = Instant::now();
    let (opt_tasks, eval_tasks) = config.tasks()?;
    let mock = config.mock_executor(&[&opt_tasks, &eval_tasks]);
    let inner: &dyn Executor = executor.unwrap_or(&mock);

    let composite = config.swarm.build()?;
    let baseline = config.swarm.baseline()?;

    let opt_exec = CountingExecutor::new(inner);
    let estimator = single_task_utility(&opt_tasks, &opt_exec);
    let edge_cfg = config.edge_opt_config();
    let (dist, record) = optimize_edges(&composite, &estimator, &edge_cfg)?;
    let optimization_secs = start.elapsed().as_secs_f64();

    let eval_start = Instant::now();
    let full_edges = EdgeDistribution::from_logits(&composite, vec![LOGIT_CAP; composite.potential_edges().len()])?
        .realize(&composite, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "random-graph"));
    let half = EdgeDistribution::new(&composite, 0.5)?;
    let random_edges = half.sample(&composite, &mut rng).edges(&half);
    let optimized_edges = dist.realize(&composite, edge_cfg.realize_threshold);

    let eval_exec = CountingExecutor::new(inner);
    let run = |graph: &CompositeGraph| answers(graph, &eval_tasks, &eval_exec);
    let base_out = run(&baseline)?;
    let full_out = run(&composite.prune(&full_edges)?)?;
    let random_out = run(&composite.prune(&random_edges)?)?;
    let opt_out = run(&composite.prune(&optimized_edges)?)?;
    let accuracy = |outs: &[String]| {
        eval_tasks.iter().zip(outs).filter(|(t, a)| t.is_correct(a)).count() as f64 / eval_tasks.len() as f64
    };
    let scores = Scores {
        baseline: accuracy(&base_out),
        full_graph: accuracy(&full_out),
        random_graph: accuracy(&random_out),
        optimized: accuracy(&opt_out),
    };
    let outcomes = eval_tasks
        .iter()
        .enumerate()
        .map(|(i, t)| ProblemOutcome {
            problem_id: t.problem_id.clone(),
            gold: t.gold.clone(),
            baseline: base_out[i].clone(),
            full_graph: full_out[i].clone(),
            random_graph: random_out[i].clone(),
            optimized: opt_out[i].clone(),
        })
        .collect();
    let output_edge_probs = dist
        .edges()
        .iter()
        .zip(dist.probs())
        .filter(|(e, _)| e.dst() == composite.output())
        .map(|(e, prob)| EdgeProbability { src: e.src().clone(), dst: e.dst().clone(), prob })
        .collect();
    let evaluation_secs = eval_start.elapsed().as_secs_f64();

    let report = EvalReport {
        seed: config.seed,
        agents: composite.agents().len() - 1,
        potential_edges: composite.potential_edges().len(),
        eval_tasks: eval_tasks.len(),
        scores,
        full_graph_edges: full_edges,
        random_graph_edges: random_edges,
        optimized_edges,
        output_edge_probs,
        final_mean_utility: record.iterations.last().map_or(0.0, |r| r.mean_utility),
        calls: CallCounts { optimization: opt_exec.calls(), evaluation: eval_exec.calls() },
        outcomes,
        timing: Timing { optimization_secs, evaluation_secs, total_secs: start.elapsed().as_secs_f64() },
    };
    let params = ParamsFile::from_distribution(&dist, &composite, edge_cfg.seed);
    Ok(ExperimentOutputs { report, composite, distribution: dist, record, params })
}
