use std::collections::BTreeMap;
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use swarmgraph_core::backends::CountingExecutor;
use swarmgraph_core::graph::{execute, Edge, Input};
use swarmgraph_core::harness::{answers, single_task_utility};
use swarmgraph_core::nodeopt::{
    ExecutorReplay, GreedyDemoImprover, HistoryEntry, Improver, NodeUpdate, PromptState, Ucb1DemoImprover,
};
use swarmgraph_core::{nodeopt, reinforce, run_adversarial_experiment, ParamsFile, TaskInstance};

use crate::setup::{create_dir, write_json, Setup};
use crate::{Classify, Common, ExecutorKind, Failure, GraphArgs};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ImproverKind {
    Greedy,
    Ucb1,
}

pub enum Problem {
    Question { text: String, gold: Option<String> },
    Task(usize),
}

const QUESTION_ID: &str = "cli";

pub fn run(
    common: &Common,
    args: &GraphArgs,
    prompts: Option<&Path>,
    problem: Problem,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let setup = Setup::load(common)?;
    let mut graph = setup.realized(args)?;
    setup.apply_prompts(&mut graph, prompts)?;
    let (input, gold) = match problem {
        Problem::Task(i) => {
            let task = setup.eval_tasks.get(i).ok_or_else(|| {
                Failure::Config(anyhow::anyhow!("task {i} out of range (0..{})", setup.eval_tasks.len()))
            })?;
            (task.input(), None)
        }
        Problem::Question { text, gold } => (Input::new(QUESTION_ID, text), gold),
    };
    let executor = setup.executor(common.executor, gold.as_deref().map(|g| (QUESTION_ID, g)))?;
    let trace = execute(&graph.to_dag(), &input, executor.as_ref()).runtime(|| "executing graph".into())?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&dir.join("trace.json"), &trace)?;
    }
    println!("{}", trace.final_output);
    Ok(())
}

pub fn optimize_edges(common: &Common, graph: Option<&Path>, out: &Path) -> Result<(), Failure> {
    let setup = Setup::load(common)?;
    let composite = setup.composite(graph)?;
    let executor = setup.executor(common.executor, None)?;
    let counting = CountingExecutor::new(executor.as_ref());
    let estimator = single_task_utility(&setup.opt_tasks, &counting);
    let config = setup.config.edge_opt_config();
    let (dist, record) =
        reinforce::optimize_edges(&composite, &estimator, &config).runtime(|| "optimizing edges".into())?;

    create_dir(out)?;
    ParamsFile::from_distribution(&dist, &composite, config.seed)
        .save(out.join("params.json"))
        .runtime(|| "writing params.json".into())?;
    record.save_jsonl(out.join("run.jsonl")).runtime(|| "writing run.jsonl".into())?;
    dist.export_matrix(&composite).save_csv(out.join("heatmap.csv")).runtime(|| "writing heatmap.csv".into())?;
    let realized = dist.realize(&composite, config.realize_threshold);
    let last = record.iterations.last().map_or(0.0, |r| r.mean_utility);
    println!(
        "{} potential edges, {} realized; final mean utility {last:.4}; {} executor calls",
        composite.potential_edges().len(),
        realized.len(),
        counting.calls()
    );
    Ok(())
}

#[derive(Serialize)]
struct NodeOptSummary<'a> {
    seed: u64,
    improver: &'a str,
    mean_score: f64,
    scores: &'a [f64],
    updates: &'a [NodeUpdate],
}

pub fn optimize_nodes(common: &Common, args: &GraphArgs, improver: ImproverKind, out: &Path) -> Result<(), Failure> {
    let setup = Setup::load(common)?;
    let graph = setup.realized(args)?;
    let executor = setup.executor(common.executor, None)?;
    let config = setup.config.node_opt_config();

    let gold: BTreeMap<&str, &TaskInstance> = setup.opt_tasks.iter().map(|t| (t.problem_id.as_str(), t)).collect();
    let correct = |problem_id: &str, answer: &str| -> f64 {
        gold.get(problem_id).map_or(0.0, |t| if t.is_correct(answer) { 1.0 } else { 0.0 })
    };
    let replay =
        ExecutorReplay::new(executor.as_ref(), |entry: &HistoryEntry, answer: &str| correct(&entry.problem_id, answer));
    let greedy = GreedyDemoImprover { scorer: &replay, config: config.clone() };
    let ucb = Ucb1DemoImprover { scorer: &replay, config: config.clone() };
    let chosen: &dyn Improver = match improver {
        ImproverKind::Greedy => &greedy,
        ImproverKind::Ucb1 => &ucb,
    };
    let problems: Vec<Input> = setup.opt_tasks.iter().map(TaskInstance::input).collect();
    let mut dag = graph.to_dag();
    let score = |input: &Input, answer: &str| correct(&input.problem_id, answer);
    let run = nodeopt::optimize_nodes(&mut dag, &problems, executor.as_ref(), chosen, &score, &config)
        .runtime(|| "optimizing nodes".into())?;

    create_dir(out)?;
    let states: Vec<PromptState> = dag.nodes().filter(|n| n.is_optimizable()).map(PromptState::of).collect();
    PromptState::save_all(&states, out.join("prompts.json")).runtime(|| "writing prompts.json".into())?;
    run.history.save(out.join("history.json")).runtime(|| "writing history.json".into())?;
    let mean_score = run.scores.iter().sum::<f64>() / run.scores.len().max(1) as f64;
    let name = improver.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let summary =
        NodeOptSummary { seed: config.seed, improver: &name, mean_score, scores: &run.scores, updates: &run.updates };
    write_json(&out.join("node_opt.json"), &summary)?;
    let changed = run.updates.iter().filter(|u| u.changed).count();
    println!(
        "{} problems, mean score {mean_score:.4}; {changed} of {} prompt updates changed a prompt",
        run.scores.len(),
        run.updates.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct Outcome {
    problem_id: String,
    gold: String,
    answer: String,
    correct: bool,
}

#[derive(Serialize)]
struct EvalSummary {
    seed: u64,
    accuracy: f64,
    eval_tasks: usize,
    edges: Vec<Edge>,
    calls: u64,
    outcomes: Vec<Outcome>,
}

pub fn eval(common: &Common, args: &GraphArgs, prompts: Option<&Path>, out: &Path) -> Result<(), Failure> {
    let setup = Setup::load(common)?;
    let mut graph = setup.realized(args)?;
    setup.apply_prompts(&mut graph, prompts)?;
    let executor = setup.executor(common.executor, None)?;
    let counting = CountingExecutor::new(executor.as_ref());
    let outs = answers(&graph, &setup.eval_tasks, &counting).runtime(|| "evaluating graph".into())?;

    let outcomes: Vec<Outcome> = setup
        .eval_tasks
        .iter()
        .zip(outs)
        .map(|(t, answer)| Outcome {
            problem_id: t.problem_id.clone(),
            gold: t.gold.clone(),
            correct: t.is_correct(&answer),
            answer,
        })
        .collect();
    let accuracy = outcomes.iter().filter(|o| o.correct).count() as f64 / outcomes.len() as f64;
    let summary = EvalSummary {
        seed: setup.config.seed,
        accuracy,
        eval_tasks: outcomes.len(),
        edges: graph.to_dag().edges().iter().cloned().collect(),
        calls: counting.calls(),
        outcomes,
    };

    create_dir(out)?;
    write_json(&out.join("eval.json"), &summary)?;
    let mut csv = String::from("problem_id,gold,answer,correct\n");
    for o in &summary.outcomes {
        csv.push_str(&format!("{},{},{},{}\n", o.problem_id, o.gold, csv_field(&o.answer), o.correct));
    }
    std::fs::write(out.join("eval.csv"), csv).runtime(|| "writing eval.csv".into())?;
    println!("accuracy {accuracy:.4} on {} tasks ({} executor calls)", summary.eval_tasks, summary.calls);
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn export_heatmap(params: &Path, out: &Path) -> Result<(), Failure> {
    let file = ParamsFile::load(params).config(|| format!("loading parameters {}", params.display()))?;
    file.heatmap().save_csv(out).runtime(|| format!("writing {}", out.display()))?;
    Ok(())
}

pub fn adversarial_exp(common: &Common, out: &Path) -> Result<(), Failure> {
    let setup = Setup::load(common)?;
    let config = &setup.config;
    config.swarm.build().config(|| "building swarm".into())?;
    config.swarm.baseline().config(|| "building baseline".into())?;
    let outputs = match common.executor {
        ExecutorKind::Mock => run_adversarial_experiment(config, None),
        ExecutorKind::Http => {
            let executor = setup.executor(ExecutorKind::Http, None)?;
            run_adversarial_experiment(config, Some(executor.as_ref()))
        }
    }
    .runtime(|| "running experiment".into())?;
    outputs.write(out).runtime(|| format!("writing outputs to {}", out.display()))?;
    let s = &outputs.report.scores;
    println!(
        "baseline {:.4}  full graph {:.4}  random graph {:.4}  optimized {:.4}  ({} potential edges, {:.1}s)",
        s.baseline,
        s.full_graph,
        s.random_graph,
        s.optimized,
        outputs.report.potential_edges,
        outputs.report.timing.total_secs
    );
    Ok(())
}
