use std::path::{Path, PathBuf};

use swarmgraph_core::backends::{Executor, HttpExecutor};
use swarmgraph_core::dist::LOGIT_CAP;
use swarmgraph_core::graph::file::GraphFile;
use swarmgraph_core::nodeopt::PromptState;
use swarmgraph_core::{CompositeGraph, EdgeDistribution, ExperimentConfig, ParamsFile, TaskInstance};

use crate::{Classify, Common, ExecutorKind, Failure, GraphArgs};

/// Everything a command needs that can be checked before any work starts.
pub struct Setup {
    pub config: ExperimentConfig,
    config_dir: PathBuf,
    pub opt_tasks: Vec<TaskInstance>,
    pub eval_tasks: Vec<TaskInstance>,
}

impl Setup {
    pub fn load(common: &Common) -> Result<Self, Failure> {
        let (mut config, config_dir) = match &common.config {
            Some(path) => {
                let config = ExperimentConfig::load(path).config(|| format!("loading config {}", path.display()))?;
                let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (config, dir)
            }
            None => (ExperimentConfig::default(), PathBuf::new()),
        };
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        config.validate().config(|| "validating config".into())?;
        let (opt_tasks, eval_tasks) = config.tasks().config(|| "generating tasks".into())?;
        Ok(Setup { config, config_dir, opt_tasks, eval_tasks })
    }

    /// The graph named on the command line, else the config's graph file
    /// (relative to the config), else the config's swarm.
    pub fn composite(&self, graph: Option<&Path>) -> Result<CompositeGraph, Failure> {
        let path = match (graph, &self.config.graph) {
            (Some(p), _) => Some(p.to_path_buf()),
            (None, Some(p)) => Some(self.config_dir.join(p)),
            (None, None) => None,
        };
        match path {
            Some(path) => {
                let what = || format!("loading graph {}", path.display());
                GraphFile::load(&path).config(what)?.to_composite().config(what)
            }
            None => self.config.swarm.build().config(|| "building swarm".into()),
        }
    }

    /// The pruned graph selected by `args`: realized from a parameter file,
    /// or the full graph when none is given.
    pub fn realized(&self, args: &GraphArgs) -> Result<CompositeGraph, Failure> {
        let composite = self.composite(args.graph.as_deref())?;
        let edges = match &args.params {
            Some(path) => {
                let what = || format!("loading parameters {}", path.display());
                let dist = ParamsFile::load(path).config(what)?.to_distribution(&composite).config(what)?;
                dist.realize(&composite, self.config.edge_opt.realize_threshold)
            }
            None => EdgeDistribution::from_logits(&composite, vec![LOGIT_CAP; composite.potential_edges().len()])
                .config(|| "building the full graph".into())?
                .realize(&composite, 0.5),
        };
        composite.prune(&edges).config(|| "realizing the graph".into())
    }

    pub fn apply_prompts(&self, graph: &mut CompositeGraph, prompts: Option<&Path>) -> Result<(), Failure> {
        if let Some(path) = prompts {
            let what = || format!("loading prompts {}", path.display());
            let states = PromptState::load_all(path).config(what)?;
            PromptState::apply_all(&states, graph).config(what)?;
        }
        Ok(())
    }

    /// The mock knows the gold label of every generated task plus `extra`.
    /// Only the `http` kind constructs a network client.
    pub fn executor(&self, kind: ExecutorKind, extra: Option<(&str, &str)>) -> Result<Box<dyn Executor>, Failure> {
        match kind {
            ExecutorKind::Mock => {
                let mut mock = self.config.mock_executor(&[self.opt_tasks.as_slice(), self.eval_tasks.as_slice()]);
                if let Some((id, gold)) = extra {
                    mock.truth.insert(id, gold);
                }
                Ok(Box::new(mock))
            }
            ExecutorKind::Http => {
                let http = HttpExecutor::new(self.config.http.clone()).runtime(|| "creating HTTP executor".into())?;
                Ok(Box::new(http))
            }
        }
    }
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let what = || format!("writing {}", path.display());
    let text = serde_json::to_string_pretty(value).runtime(what)?;
    std::fs::write(path, text + "\n").runtime(what)
}

pub fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).runtime(|| format!("creating {}", dir.display()))
}
