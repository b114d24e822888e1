//! Policy-gradient optimization of edge logits.
//!
//! Each iteration draws `M` graphs from the current distribution, scores each
//! pruned graph with a [`UtilityEstimator`], and moves the logits along
//! `(1/M) Σ (u_i − b) ∇ log p(G_i)`.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{DistError, EdgeDistribution, GraphSample};
use crate::graph::{CompositeGraph, GraphError};

pub type UtilityError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum ReinforceError {
    #[error("expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("{samples} samples but {utilities} utilities")]
    LengthMismatch { samples: usize, utilities: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("utility estimate failed at iteration {iteration}, sample {sample}")]
    Estimator {
        iteration: usize,
        sample: usize,
        #[source]
        source: UtilityError,
    },
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One bias-corrected Adam ascent step.
pub fn adam_step(
    state: &AdamState,
    logits: &[f64],
    grad: &[f64],
    lr: f64,
) -> Result<(AdamState, Vec<f64>), ReinforceError> {
    let n = logits.len();
    for got in [grad.len(), state.m.len(), state.v.len()] {
        if got != n {
            return Err(ReinforceError::ShapeMismatch { expected: n, got });
        }
    }
    let mut next = state.clone();
    next.t += 1;
    let bc1 = 1.0 - state.beta1.powf(next.t as f64);
    let bc2 = 1.0 - state.beta2.powf(next.t as f64);
    let mut out = logits.to_vec();
    for i in 0..n {
        next.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        next.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        let m_hat = next.m[i] / bc1;
        let v_hat = next.v[i] / bc2;
        out[i] += lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok((next, out))
}

/// Plain gradient ascent.
pub fn sgd_step(logits: &[f64], grad: &[f64], lr: f64) -> Result<Vec<f64>, ReinforceError> {
    if grad.len() != logits.len() {
        return Err(ReinforceError::ShapeMismatch { expected: logits.len(), got: grad.len() });
    }
    Ok(logits.iter().zip(grad).map(|(x, g)| x + lr * g).collect())
}

/// `(1/M) Σ (u_i − baseline) ∇ log p(G_i)` with respect to the logits.
pub fn estimate_gradient(
    dist: &EdgeDistribution,
    composite: &CompositeGraph,
    samples: &[GraphSample],
    utilities: &[f64],
    baseline: f64,
) -> Result<Vec<f64>, ReinforceError> {
    if samples.len() != utilities.len() || samples.is_empty() {
        return Err(ReinforceError::LengthMismatch { samples: samples.len(), utilities: utilities.len() });
    }
    let mut grad = vec![0.0; dist.len()];
    for (s, &u) in samples.iter().zip(utilities) {
        let g = dist.grad_log_prob(composite, &s.included)?;
        let w = u - baseline;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += w * gi;
        }
    }
    let m = samples.len() as f64;
    grad.iter_mut().for_each(|x| *x /= m);
    Ok(grad)
}

/// Noisy utility of a (pruned) swarm.
///
/// Called concurrently from several threads; all randomness must come from
/// `rng` so that runs replay exactly.
pub trait UtilityEstimator: Sync {
    fn estimate(&self, graph: &CompositeGraph, rng: &mut ChaCha8Rng) -> Result<f64, UtilityError>;
}

impl<F> UtilityEstimator for F
where
    F: Fn(&CompositeGraph, &mut ChaCha8Rng) -> Result<f64, UtilityError> + Sync,
{
    fn estimate(&self, graph: &CompositeGraph, rng: &mut ChaCha8Rng) -> Result<f64, UtilityError> {
        self(graph, rng)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeOptConfig {
    pub iterations: usize,
    pub samples_per_iter: usize,
    pub learning_rate: f64,
    pub baseline: f64,
    pub init_prob: f64,
    pub seed: u64,
    pub realize_threshold: f64,
    pub optimizer: Optimizer,
}

impl Default for EdgeOptConfig {
    fn default() -> Self {
        EdgeOptConfig {
            iterations: 200,
            samples_per_iter: 4,
            learning_rate: 0.1,
            baseline: 0.0,
            init_prob: 0.5,
            seed: 0,
            realize_threshold: 0.5,
            optimizer: Optimizer::Adam,
        }
    }
}

impl EdgeOptConfig {
    pub fn validate(&self) -> Result<(), ReinforceError> {
        if self.samples_per_iter == 0 {
            return Err(ReinforceError::Config("samples_per_iter must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(ReinforceError::Config("learning_rate must be positive".into()));
        }
        if !(self.init_prob > 0.0 && self.init_prob < 1.0) {
            return Err(ReinforceError::Config("init_prob must lie in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.realize_threshold) {
            return Err(ReinforceError::Config("realize_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub mean_utility: f64,
    pub utilities: Vec<f64>,
    /// Logits the iteration's graphs were sampled from.
    pub logits: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptRunRecord {
    pub iterations: Vec<IterationRecord>,
}

impl OptRunRecord {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), ReinforceError> {
        for rec in &self.iterations {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<(), ReinforceError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, ReinforceError> {
        let mut iterations = Vec::new();
        for line in input.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                iterations.push(serde_json::from_str(&line)?);
            }
        }
        Ok(OptRunRecord { iterations })
    }
}

/// The rng used for sample `sample` of iteration `iteration`: one ChaCha
/// stream per (iteration, sample) pair, so results do not depend on thread
/// scheduling.
pub fn sample_rng(seed: u64, iteration: usize, sample: usize, samples_per_iter: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((iteration as u64) * (samples_per_iter as u64) + sample as u64);
    rng
}

/// Runs the optimizer from `init_prob`.
pub fn optimize_edges(
    composite: &CompositeGraph,
    estimator: &dyn UtilityEstimator,
    config: &EdgeOptConfig,
) -> Result<(EdgeDistribution, OptRunRecord), ReinforceError> {
    config.validate()?;
    let init = EdgeDistribution::new(composite, config.init_prob)?;
    optimize_edges_from(composite, init, estimator, config)
}

/// Runs the optimizer from an existing distribution (e.g. a loaded
/// parameter file). `config.init_prob` is ignored.
pub fn optimize_edges_from(
    composite: &CompositeGraph,
    mut dist: EdgeDistribution,
    estimator: &dyn UtilityEstimator,
    config: &EdgeOptConfig,
) -> Result<(EdgeDistribution, OptRunRecord), ReinforceError> {
    config.validate()?;
    if dist.edges() != composite.potential_edges() {
        return Err(DistError::EdgeMismatch.into());
    }
    let m = config.samples_per_iter;
    let mut adam = AdamState::new(dist.len());
    let mut record = OptRunRecord::default();
    for iteration in 0..config.iterations {
        let snapshot = &dist;
        let evaluated: Vec<(GraphSample, f64)> = (0..m)
            .into_par_iter()
            .map(|j| {
                let mut rng = sample_rng(config.seed, iteration, j, m);
                let sample = snapshot.sample(composite, &mut rng);
                let pruned = composite.prune(&sample.edges(snapshot))?;
                let u = estimator.estimate(&pruned, &mut rng).map_err(|source| ReinforceError::Estimator {
                    iteration,
                    sample: j,
                    source,
                })?;
                Ok((sample, u))
            })
            .collect::<Result<_, ReinforceError>>()?;
        let (samples, utilities): (Vec<GraphSample>, Vec<f64>) = evaluated.into_iter().unzip();
        let grad = estimate_gradient(&dist, composite, &samples, &utilities, config.baseline)?;
        let logits = match config.optimizer {
            Optimizer::Adam => {
                let (next, logits) = adam_step(&adam, dist.logits(), &grad, config.learning_rate)?;
                adam = next;
                logits
            }
            Optimizer::Sgd => sgd_step(dist.logits(), &grad, config.learning_rate)?,
        };
        record.iterations.push(IterationRecord {
            iter: iteration,
            mean_utility: utilities.iter().sum::<f64>() / m as f64,
            utilities,
            logits: dist.logits().to_vec(),
        });
        dist.set_logits(&logits)?;
    }
    Ok((dist, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn adam_zero_gradient_is_noop() {
        let s = AdamState::new(3);
        let (_, out) = adam_step(&s, &[0.5, -1.0, 2.0], &[0.0; 3], 0.1).unwrap();
        assert_eq!(out, vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let s = AdamState::new(1);
        let (next, out) = adam_step(&s, &[0.0], &[1.0], 0.1).unwrap();
        // m̂ = 1, v̂ = 1 after bias correction
        assert_relative_eq!(out[0], 0.1 / (1.0 + 1e-8), epsilon = 1e-15);
        assert_eq!(next.t, 1);
        let (_, down) = adam_step(&s, &[0.0], &[-3.0], 0.1).unwrap();
        assert!(down[0] < 0.0);
    }

    #[test]
    fn adam_constant_gradient_is_monotone() {
        let mut s = AdamState::new(1);
        let mut x = vec![0.0];
        for _ in 0..50 {
            let (ns, nx) = adam_step(&s, &x, &[0.3], 0.05).unwrap();
            assert!(nx[0] > x[0]);
            s = ns;
            x = nx;
        }
    }

    #[test]
    fn adam_shape_mismatch() {
        let s = AdamState::new(2);
        assert!(matches!(adam_step(&s, &[0.0, 0.0], &[1.0], 0.1), Err(ReinforceError::ShapeMismatch { .. })));
        assert!(matches!(adam_step(&s, &[0.0], &[1.0], 0.1), Err(ReinforceError::ShapeMismatch { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(EdgeOptConfig::default().validate().is_ok());
        assert!(EdgeOptConfig { samples_per_iter: 0, ..Default::default() }.validate().is_err());
        assert!(EdgeOptConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(EdgeOptConfig { init_prob: 1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn jsonl_roundtrip() {
        let rec = OptRunRecord {
            iterations: vec![
                IterationRecord { iter: 0, mean_utility: 0.5, utilities: vec![0.0, 1.0], logits: vec![0.1] },
                IterationRecord { iter: 1, mean_utility: 1.0, utilities: vec![1.0, 1.0], logits: vec![0.2] },
            ],
        };
        let mut buf = Vec::new();
        rec.write_jsonl(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 2);
        assert_eq!(OptRunRecord::read_jsonl(buf.as_slice()).unwrap(), rec);
    }
}
