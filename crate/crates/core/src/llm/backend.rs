//! Model backends: recorded replay, live HTTP, and a recorder wrapper.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::PromptRequest;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    /// Worth retrying: transport failures, timeouts, 429 and 5xx.
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("backend failure: {0}")]
    Fatal(String),
    #[error("no recording at {}", path.display())]
    MissingRecording { path: PathBuf },
}

pub trait ModelBackend: Send + Sync {
    /// Whether the backend honors `PromptRequest::seed`.
    fn supports_seed(&self) -> bool {
        false
    }

    /// Whether results should carry a wall-clock timestamp.
    fn is_live(&self) -> bool {
        true
    }

    fn complete(&self, request: &PromptRequest) -> Result<String, BackendError>;
}

/// Serves responses from `<dir>/<function_id>.<model_id>.txt`.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    dir: PathBuf,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReplayBackend { dir: dir.into() }
    }

    pub fn recording_path(&self, request: &PromptRequest) -> PathBuf {
        self.dir.join(format!("{}.txt", request.recording_key()))
    }
}

impl ModelBackend for ReplayBackend {
    fn supports_seed(&self) -> bool {
        true
    }

    fn is_live(&self) -> bool {
        false
    }

    fn complete(&self, request: &PromptRequest) -> Result<String, BackendError> {
        let path = self.recording_path(request);
        match std::fs::read(&path) {
            Ok(bytes) => {
                String::from_utf8(bytes).map_err(|_| BackendError::Fatal(format!("{} is not UTF-8", path.display())))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(BackendError::MissingRecording { path }),
            Err(e) => Err(BackendError::Fatal(format!("{}: {e}", path.display()))),
        }
    }
}

/// Wraps a backend and writes every successful response into a replay
/// directory, so a live run can be replayed later.
pub struct RecordingBackend<B> {
    inner: B,
    dir: PathBuf,
}

impl<B: ModelBackend> RecordingBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(RecordingBackend { inner, dir })
    }
}

impl<B: ModelBackend> ModelBackend for RecordingBackend<B> {
    fn supports_seed(&self) -> bool {
        self.inner.supports_seed()
    }

    fn is_live(&self) -> bool {
        self.inner.is_live()
    }

    fn complete(&self, request: &PromptRequest) -> Result<String, BackendError> {
        let out = self.inner.complete(request)?;
        let path = self.dir.join(format!("{}.txt", request.recording_key()));
        std::fs::write(&path, out.as_bytes())
            .map_err(|e| BackendError::Fatal(format!("cannot record {}: {e}", path.display())))?;
        Ok(out)
    }
}

/// Token bucket shared by all in-flight requests to one backend.
#[derive(Debug)]
pub struct RateLimiter {
    capacity: f64,
    per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(requests_per_minute: f64, burst: u32) -> Self {
        let capacity = f64::from(burst.max(1));
        RateLimiter { capacity, per_sec: requests_per_minute / 60.0, state: Mutex::new((capacity, Instant::now())) }
    }

    /// Block until a token is available.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap();
                let now = Instant::now();
                st.0 = (st.0 + now.duration_since(st.1).as_secs_f64() * self.per_sec).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - st.0) / self.per_sec)
            };
            std::thread::sleep(wait);
        }
    }
}

fn default_timeout() -> u64 {
    300
}

fn default_true() -> bool {
    true
}

fn default_burst() -> u32 {
    1
}

/// Live backend settings, loadable from TOML or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveConfig {
    /// Chat-completions endpoint URL.
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    pub model: String,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    #[serde(default = "default_true")]
    pub send_seed: bool,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub requests_per_minute: Option<f64>,
    #[serde(default = "default_burst")]
    pub burst: u32,
}

impl LiveConfig {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Fatal(format!("cannot read {}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| BackendError::Fatal(format!("bad backend config {}: {e}", path.display())))
    }
}

/// OpenAI-style chat-completions client.
pub struct LiveBackend {
    config: LiveConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    limiter: Option<RateLimiter>,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, BackendError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| BackendError::Fatal(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = config.requests_per_minute.map(|rpm| RateLimiter::new(rpm, config.burst));
        Ok(LiveBackend { config, agent, api_key, limiter })
    }

    fn body(&self, request: &PromptRequest) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
        });
        if let Some(t) = self.config.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(m) = self.config.max_tokens {
            body["max_tokens"] = json!(m);
        }
        if self.config.send_seed {
            body["seed"] = json!(request.seed);
        }
        body
    }
}

impl ModelBackend for LiveBackend {
    fn supports_seed(&self) -> bool {
        self.config.send_seed
    }

    fn complete(&self, request: &PromptRequest) -> Result<String, BackendError> {
        if let Some(l) = &self.limiter {
            l.acquire();
        }
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(self.body(request)).map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(BackendError::Transient(format!("http status {status}")));
        }
        if status >= 400 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError::Fatal(format!("http status {status}: {text}")));
        }
        let v: Value =
            resp.body_mut().read_json().map_err(|e| BackendError::Transient(format!("bad response body: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Fatal(format!("response has no message content: {v}")))
    }
}
