//! `swarmgraph`: run, optimize and evaluate agent swarms from the command line.
//!
//! Exit status is 0 on success, 1 when the invocation or configuration is
//! unusable (nothing is written in that case) and 2 when a run fails.

mod commands;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "swarmgraph", version, about = "Optimize agent swarms as computational graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExecutorKind {
    /// Deterministic offline mock; never touches the network.
    Mock,
    /// OpenAI-compatible chat completions endpoint from the `http` config section.
    Http,
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Experiment configuration (JSON). Built-in defaults apply when omitted.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Overrides the configuration's top-level seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = ExecutorKind::Mock)]
    pub executor: ExecutorKind,
}

#[derive(Args, Clone, Debug)]
pub struct GraphArgs {
    /// Graph definition file; overrides the config's `graph` and `swarm`.
    #[arg(long, value_name = "FILE")]
    pub graph: Option<PathBuf>,
    /// Learned edge parameters; the graph is realized at the configured
    /// threshold. Without it every potential edge that keeps the graph
    /// acyclic is used.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute a graph on one question and print its final answer.
    #[command(group(ArgGroup::new("problem").required(true).args(["question", "task"])))]
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        graph: GraphArgs,
        /// Node prompts written by `optimize-nodes`.
        #[arg(long, value_name = "FILE")]
        prompts: Option<PathBuf>,
        /// Free-form question text.
        #[arg(long)]
        question: Option<String>,
        /// Gold label for `--question`; the mock executor needs it.
        #[arg(long, requires = "question")]
        gold: Option<String>,
        /// Index into the generated evaluation tasks.
        #[arg(long)]
        task: Option<usize>,
        /// Directory for `trace.json`.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Learn edge probabilities with REINFORCE on the optimization tasks.
    OptimizeEdges {
        #[command(flatten)]
        common: Common,
        /// Graph definition file; overrides the config's `graph` and `swarm`.
        #[arg(long, value_name = "FILE")]
        graph: Option<PathBuf>,
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Improve node prompts from execution history on the optimization tasks.
    OptimizeNodes {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, value_enum, default_value_t = commands::ImproverKind::Greedy)]
        improver: commands::ImproverKind,
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Score a graph on the held-out evaluation tasks.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        graph: GraphArgs,
        /// Node prompts written by `optimize-nodes`.
        #[arg(long, value_name = "FILE")]
        prompts: Option<PathBuf>,
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Write the edge-probability matrix of a parameter file as CSV.
    ExportHeatmap {
        #[arg(long, value_name = "FILE")]
        params: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Run the adversarial-swarm recovery experiment end to end.
    AdversarialExp {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
}

/// A failed command, split by exit status.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

/// Tags an error with the exit status it should produce.
pub trait Classify<T> {
    fn config(self, what: impl FnOnce() -> String) -> Result<T, Failure>;
    fn runtime(self, what: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self, what: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into().context(what())))
    }

    fn runtime(self, what: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into().context(what())))
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { common, graph, prompts, question, gold, task, out } => {
            let problem = match (question, task) {
                (_, Some(index)) => commands::Problem::Task(index),
                (Some(text), None) => commands::Problem::Question { text, gold },
                (None, None) => unreachable!("clap requires one of --question and --task"),
            };
            commands::run(&common, &graph, prompts.as_deref(), problem, out.as_deref())
        }
        Command::OptimizeEdges { common, graph, out } => commands::optimize_edges(&common, graph.as_deref(), &out),
        Command::OptimizeNodes { common, graph, improver, out } => {
            commands::optimize_nodes(&common, &graph, improver, &out)
        }
        Command::Eval { common, graph, prompts, out } => commands::eval(&common, &graph, prompts.as_deref(), &out),
        Command::ExportHeatmap { params, out } => commands::export_heatmap(&params, &out),
        Command::AdversarialExp { common, out } => commands::adversarial_exp(&common, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (Failure::Config(e) | Failure::Runtime(e)) = &failure;
            eprintln!("error: {e:#}");
            ExitCode::from(failure.exit_code())
        }
    }
}
