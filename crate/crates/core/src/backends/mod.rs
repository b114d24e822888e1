//! Node-routine executors.
//!
//! Graph execution renders each LLM-backed node into an [`ExecutorRequest`]
//! and hands it to an [`Executor`]. Two implementations ship here: a
//! deterministic [`MockExecutor`] for experiments and tests, and an
//! OpenAI-compatible [`HttpExecutor`].

mod http;
mod mock;
mod render;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::graph::NodeId;

pub use http::{HttpExecutor, HttpExecutorConfig, HttpResponse, ReqwestTransport, RetryPolicy, Transport};
pub use mock::{mock_invoke, DrawKey, MockExecutor, MockPolicy, TaskTruth};
pub use render::{render_request, ADVERSARIAL_MARKER};

/// A fully rendered query for one node invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutorRequest {
    pub node_id: NodeId,
    pub problem_id: String,
    pub system_prompt: String,
    pub user_content: String,
    /// `None` defers to the executor's configured temperature.
    pub temperature: Option<f64>,
    /// Distinguishes repeated queries of one node on one problem.
    pub nonce: u64,
    /// Digest of everything the node was prompted with except its context.
    pub prompt_digest: String,
    /// Candidate answers, set only for prompt-based decision nodes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<String>,
}

impl ExecutorRequest {
    pub fn with_nonce(mut self, nonce: u64) -> Self {
        self.nonce = nonce;
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExecutorError {
    #[error("executor does not support this routine")]
    Unsupported,
    #[error("no ground truth registered for problem {0:?}")]
    MissingTruth(String),
    #[error("API key environment variable {0} is not set")]
    AuthMissing(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("HTTP status {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("response cache: {0}")]
    Cache(String),
    #[error("{0}")]
    Other(String),
}

/// Resolves node routines. Implementations must tolerate concurrent calls.
pub trait Executor: Send + Sync {
    fn invoke(&self, request: &ExecutorRequest) -> Result<String, ExecutorError>;
}

impl<E: Executor + ?Sized> Executor for &E {
    fn invoke(&self, request: &ExecutorRequest) -> Result<String, ExecutorError> {
        (**self).invoke(request)
    }
}

impl<E: Executor + ?Sized> Executor for Box<E> {
    fn invoke(&self, request: &ExecutorRequest) -> Result<String, ExecutorError> {
        (**self).invoke(request)
    }
}

/// Rejects every request. Graphs made only of pure and majority-vote nodes
/// run without an LLM.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoExecutor;

impl Executor for NoExecutor {
    fn invoke(&self, _: &ExecutorRequest) -> Result<String, ExecutorError> {
        Err(ExecutorError::Unsupported)
    }
}

/// Wraps an executor and counts successful calls.
#[derive(Debug)]
pub struct CountingExecutor<E> {
    inner: E,
    calls: AtomicU64,
}

impl<E> CountingExecutor<E> {
    pub fn new(inner: E) -> Self {
        CountingExecutor { inner, calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Executor> Executor for CountingExecutor<E> {
    fn invoke(&self, request: &ExecutorRequest) -> Result<String, ExecutorError> {
        let out = self.inner.invoke(request)?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(out)
    }
}

/// Stable 64-bit digest of a sequence of byte strings (length-prefixed).
pub(crate) fn digest_u64(parts: &[&[u8]]) -> [u64; 2] {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let out = h.finalize();
    let a = u64::from_le_bytes(out[0..8].try_into().expect("8 bytes"));
    let b = u64::from_le_bytes(out[8..16].try_into().expect("8 bytes"));
    [a, b]
}
