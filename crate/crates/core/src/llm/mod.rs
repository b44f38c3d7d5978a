//! Prompting models for improved functions and parsing their answers.

pub mod backend;
mod template;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::lexer::{lex, TokenKind};
use crate::corpus::{extract::find_functions, FunctionRecord};
pub use backend::{BackendError, LiveBackend, LiveConfig, ModelBackend, RateLimiter, RecordingBackend, ReplayBackend};
pub use template::{PromptTemplate, PLACEHOLDER};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing replay recording {}", path.display())]
    MissingRecording { path: std::path::PathBuf },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptTask {
    #[default]
    Improve,
    Contamination,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub function_id: String,
    pub model_id: String,
    pub seed: u64,
    pub system_text: String,
    pub user_text: String,
    #[serde(default)]
    pub task: PromptTask,
}

impl PromptRequest {
    /// File stem used by replay recordings. Path separators in model ids
    /// are replaced so every key is a single file name.
    pub fn recording_key(&self) -> String {
        let model: String =
            self.model_id.chars().map(|c| if matches!(c, '/' | '\\' | ':') { '_' } else { c }).collect();
        match self.task {
            PromptTask::Improve => format!("{}.{model}", self.function_id),
            PromptTask::Contamination => format!("{}.{model}.probe", self.function_id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationStatus {
    Ok,
    Unparseable,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub function_id: String,
    pub model_id: String,
    pub seed: u64,
    pub seed_honored: bool,
    pub raw_response: String,
    pub extracted_code: Option<String>,
    pub status: GenerationStatus,
    #[serde(default)]
    pub error: Option<String>,
    /// Unix seconds; absent for replayed responses.
    #[serde(default)]
    pub timestamp: Option<u64>,
}

impl GenerationResult {
    pub fn candidate(&self) -> Option<&str> {
        match self.status {
            GenerationStatus::Ok => self.extracted_code.as_deref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// First backoff; doubles on each retry.
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, backoff_ms: 1000 }
    }
}

pub fn render_prompt(
    record: &FunctionRecord,
    template: &PromptTemplate,
    model_id: &str,
    seed: u64,
) -> Result<PromptRequest, GatewayError> {
    Ok(PromptRequest {
        function_id: record.id.clone(),
        model_id: model_id.to_string(),
        seed,
        system_text: template.system.clone(),
        user_text: template.render(&record.source_text)?,
        task: PromptTask::Improve,
    })
}

fn trim_trailing_newlines(s: &str) -> &str {
    s.trim_end_matches(['\n', '\r'])
}

/// Does `text` open with a C function definition (after comments and
/// preprocessor lines)?
fn starts_with_function(text: &str) -> bool {
    let src = text.as_bytes();
    let Some(first_code) = lex(src).into_iter().find(|t| t.kind != TokenKind::Comment && !t.directive) else {
        return false;
    };
    find_functions(src).first().is_some_and(|f| f.start <= first_code.span.start && first_code.span.start < f.end)
}

/// Pull the candidate function out of a model response: the first fenced
/// block, or the whole response if it already starts with a function.
pub fn parse_response(raw: &str) -> Option<String> {
    let mut offset = 0;
    let mut interior_start = None;
    for line in raw.split_inclusive('\n') {
        let is_fence = line.trim_start().starts_with("```");
        match interior_start {
            None if is_fence => interior_start = Some(offset + line.len()),
            Some(start) if is_fence => {
                return non_empty(trim_trailing_newlines(&raw[start..offset]));
            }
            _ => {}
        }
        offset += line.len();
    }
    if let Some(start) = interior_start {
        // Unclosed fence: the response was cut off; keep what is there.
        return non_empty(trim_trailing_newlines(&raw[start.min(raw.len())..]));
    }
    starts_with_function(raw).then(|| trim_trailing_newlines(raw)).and_then(non_empty)
}

fn non_empty(s: &str) -> Option<String> {
    (!s.trim().is_empty()).then(|| s.to_string())
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Query `backend` once (with retries) and parse the answer.
pub fn generate(
    request: &PromptRequest,
    backend: &dyn ModelBackend,
    retry: &RetryPolicy,
) -> Result<GenerationResult, GatewayError> {
    let mut attempt = 0u32;
    let outcome = loop {
        match backend.complete(request) {
            Err(BackendError::Transient(msg)) if attempt < retry.max_retries => {
                let wait = retry.backoff_ms.saturating_mul(1u64 << attempt.min(16));
                log::warn!("{}: transient failure ({msg}), retry {} in {wait} ms", request.function_id, attempt + 1);
                std::thread::sleep(Duration::from_millis(wait));
                attempt += 1;
            }
            Err(BackendError::MissingRecording { path }) => return Err(GatewayError::MissingRecording { path }),
            other => break other,
        }
    };
    let mut result = GenerationResult {
        function_id: request.function_id.clone(),
        model_id: request.model_id.clone(),
        seed: request.seed,
        seed_honored: backend.supports_seed(),
        raw_response: String::new(),
        extracted_code: None,
        status: GenerationStatus::BackendError,
        error: None,
        timestamp: backend.is_live().then(now_unix),
    };
    match outcome {
        Ok(raw) => {
            result.extracted_code = parse_response(&raw);
            result.status =
                if result.extracted_code.is_some() { GenerationStatus::Ok } else { GenerationStatus::Unparseable };
            result.raw_response = raw;
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    Ok(result)
}

/// Run many requests with at most `max_in_flight` outstanding. Every request
/// yields exactly one result, in request order; a missing recording becomes
/// a `BackendError` result rather than aborting the batch.
pub fn generate_batch(
    requests: &[PromptRequest],
    backend: &dyn ModelBackend,
    retry: &RetryPolicy,
    max_in_flight: usize,
) -> Vec<GenerationResult> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<GenerationResult>>> = Mutex::new(vec![None; requests.len()]);
    let workers = max_in_flight.clamp(1, requests.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(req) = requests.get(i) else { break };
                let res = generate(req, backend, retry).unwrap_or_else(|e| GenerationResult {
                    function_id: req.function_id.clone(),
                    model_id: req.model_id.clone(),
                    seed: req.seed,
                    seed_honored: backend.supports_seed(),
                    raw_response: String::new(),
                    extracted_code: None,
                    status: GenerationStatus::BackendError,
                    error: Some(e.to_string()),
                    timestamp: None,
                });
                slots.lock().unwrap()[i] = Some(res);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// Copy `<src>/<function name>.txt` responses into `dst` under the replay
/// key of each record. Records without a response file are skipped; the
/// number copied is returned.
pub fn stage_named_recordings(
    records: &[FunctionRecord],
    src: &std::path::Path,
    model_id: &str,
    dst: &std::path::Path,
) -> std::io::Result<usize> {
    std::fs::create_dir_all(dst)?;
    let mut copied = 0;
    for r in records {
        let from = src.join(format!("{}.txt", r.name));
        if !from.is_file() {
            continue;
        }
        let key = PromptRequest {
            function_id: r.id.clone(),
            model_id: model_id.to_string(),
            seed: 0,
            system_text: String::new(),
            user_text: String::new(),
            task: PromptTask::Improve,
        }
        .recording_key();
        std::fs::copy(&from, dst.join(format!("{key}.txt")))?;
        copied += 1;
    }
    Ok(copied)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub function_id: String,
    pub model_id: String,
    pub recognized: bool,
    pub answer: String,
}

/// Case-insensitive keyword match on a probe answer.
pub fn is_recognized(answer: &str, keyword: &str) -> bool {
    answer.to_lowercase().contains(&keyword.to_lowercase())
}

/// Ask the model whether it knows which project `record` comes from.
pub fn contamination_probe(
    record: &FunctionRecord,
    backend: &dyn ModelBackend,
    template: &PromptTemplate,
    model_id: &str,
    keyword: &str,
) -> Result<ProbeOutcome, GatewayError> {
    let request = PromptRequest {
        function_id: record.id.clone(),
        model_id: model_id.to_string(),
        seed: 0,
        system_text: template.system.clone(),
        user_text: template.render(&record.source_text)?,
        task: PromptTask::Contamination,
    };
    let answer = backend.complete(&request).map_err(|e| match e {
        BackendError::MissingRecording { path } => GatewayError::MissingRecording { path },
        other => GatewayError::Backend(other),
    })?;
    Ok(ProbeOutcome {
        function_id: record.id.clone(),
        model_id: model_id.to_string(),
        recognized: is_recognized(&answer, keyword),
        answer,
    })
}
