use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{Executor, ExecutorError, ExecutorRequest};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, initial_backoff_ms: 500, max_backoff_ms: 30_000 }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

/// Settings for an OpenAI-compatible chat completions endpoint.
///
/// The API key is read from the environment variable named by
/// `api_key_env` on every call and is never written anywhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpExecutorConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub api_key_env: String,
    pub retry: RetryPolicy,
    /// Responses are cached here when set. Cached entries are replayed even
    /// for temperature > 0, so a cache hit is not a fresh sample.
    pub cache_dir: Option<PathBuf>,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for HttpExecutorConfig {
    fn default() -> Self {
        HttpExecutorConfig {
            base_url: "https://api.openai.com".into(),
            model: "gpt-4-1106-preview".into(),
            temperature: 0.2,
            api_key_env: "OPENAI_API_KEY".into(),
            retry: RetryPolicy::default(),
            cache_dir: None,
            max_in_flight: 8,
            timeout_secs: 120,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// The network hop, separated out so tests can script responses.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer_token: &str, body: &str) -> Result<HttpResponse, String>;
}

#[derive(Debug)]
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, ExecutorError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ExecutorError::Transport(e.to_string()))?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn post_json(&self, url: &str, bearer_token: &str, body: &str) -> Result<HttpResponse, String> {
        let response = self
            .client
            .post(url)
            .bearer_auth(bearer_token)
            .header("content-type", "application/json")
            .body(body.to_string())
            .send()
            .map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut active = self.active.lock().expect("in-flight lock");
        while *active >= self.limit {
            active = self.freed.wait(active).expect("in-flight lock");
        }
        *active += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.active.lock().expect("in-flight lock") -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    request: serde_json::Value,
    response: String,
    timestamp: u64,
}

pub struct HttpExecutor {
    config: HttpExecutorConfig,
    transport: Box<dyn Transport>,
    in_flight: InFlight,
}

impl std::fmt::Debug for HttpExecutor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpExecutor").field("config", &self.config).finish_non_exhaustive()
    }
}

impl HttpExecutor {
    pub fn new(config: HttpExecutorConfig) -> Result<Self, ExecutorError> {
        let transport = ReqwestTransport::new(Duration::from_secs(config.timeout_secs))?;
        Ok(Self::with_transport(config, Box::new(transport)))
    }

    pub fn with_transport(config: HttpExecutorConfig, transport: Box<dyn Transport>) -> Self {
        let limit = config.max_in_flight.max(1);
        HttpExecutor { config, transport, in_flight: InFlight { limit, active: Mutex::new(0), freed: Condvar::new() } }
    }

    pub fn config(&self) -> &HttpExecutorConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn cache_path(&self, body: &serde_json::Value) -> Option<PathBuf> {
        let dir = self.config.cache_dir.as_ref()?;
        let digest = Sha256::digest(body.to_string().as_bytes());
        Some(dir.join(format!("{}.json", hex::encode(digest))))
    }

    fn read_cache(path: &PathBuf) -> Option<String> {
        let text = std::fs::read_to_string(path).ok()?;
        let entry: CacheEntry = serde_json::from_str(&text).ok()?;
        Some(entry.response)
    }

    fn write_cache(path: &PathBuf, body: &serde_json::Value, response: &str) -> Result<(), ExecutorError> {
        let dir = path.parent().expect("cache file has a parent");
        std::fs::create_dir_all(dir).map_err(|e| ExecutorError::Cache(e.to_string()))?;
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let entry = CacheEntry { request: body.clone(), response: response.to_string(), timestamp };
        let text = serde_json::to_string_pretty(&entry).map_err(|e| ExecutorError::Cache(e.to_string()))?;
        let mut tmp = tempfile_in(dir)?;
        std::io::Write::write_all(&mut tmp.1, text.as_bytes()).map_err(|e| ExecutorError::Cache(e.to_string()))?;
        drop(tmp.1);
        std::fs::rename(&tmp.0, path).map_err(|e| ExecutorError::Cache(e.to_string()))?;
        tmp.0 = PathBuf::new();
        Ok(())
    }

    fn parse_content(body: &str) -> Result<String, ExecutorError> {
        let value: serde_json::Value =
            serde_json::from_str(body).map_err(|e| ExecutorError::MalformedResponse(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ExecutorError::MalformedResponse("missing choices[0].message.content".into()))
    }
}

fn tempfile_in(dir: &std::path::Path) -> Result<(PathBuf, std::fs::File), ExecutorError> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let path = dir.join(format!(".tmp-{}-{n}", std::process::id()));
    let file = std::fs::File::create(&path).map_err(|e| ExecutorError::Cache(e.to_string()))?;
    Ok((path, file))
}

impl Executor for HttpExecutor {
    fn invoke(&self, request: &ExecutorRequest) -> Result<String, ExecutorError> {
        let body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_content},
            ],
            "temperature": request.temperature.unwrap_or(self.config.temperature),
        });
        let cache = self.cache_path(&body);
        if let Some(hit) = cache.as_ref().and_then(Self::read_cache) {
            return Ok(hit);
        }
        let key = std::env::var(&self.config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| ExecutorError::AuthMissing(self.config.api_key_env.clone()))?;

        let url = self.endpoint();
        let payload = body.to_string();
        let attempts = self.config.retry.max_attempts.max(1);
        let mut last = ExecutorError::Transport("no attempt made".into());
        for attempt in 1..=attempts {
            let result = {
                let _slot = self.in_flight.acquire();
                self.transport.post_json(&url, &key, &payload)
            };
            match result {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    let content = Self::parse_content(&resp.body)?;
                    if let Some(path) = &cache {
                        Self::write_cache(path, &body, &content)?;
                    }
                    return Ok(content);
                }
                Ok(resp) if resp.status == 429 => last = ExecutorError::RateLimited { attempts: attempt },
                Ok(resp) if resp.status >= 500 => {
                    last = ExecutorError::HttpStatus { status: resp.status, body: resp.body }
                }
                Ok(resp) => return Err(ExecutorError::HttpStatus { status: resp.status, body: resp.body }),
                Err(e) => last = ExecutorError::Transport(e),
            }
            if attempt < attempts {
                std::thread::sleep(self.config.retry.backoff(attempt));
            }
        }
        Err(last)
    }
}
