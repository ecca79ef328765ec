//! Uniform completion interface over a remote chat endpoint and a
//! deterministic scripted backend for tests and trace replay.
//!
//! Every request/response pair can be appended to a run log that is
//! sufficient to reconstruct the full prompt stream of a run.

use std::collections::{HashMap, VecDeque};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Which template produced a prompt; keys scripted replay and logging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptTag {
    ActionSelection,
    MethodologyInduction,
}

impl PromptTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            PromptTag::ActionSelection => "action_selection",
            PromptTag::MethodologyInduction => "methodology_induction",
        }
    }
}

/// A single-turn completion request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: usize,
    pub tag: PromptTag,
}

impl CompletionRequest {
    pub fn action_selection(prompt: impl Into<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: 512,
            tag: PromptTag::ActionSelection,
        }
    }

    pub fn methodology_induction(prompt: impl Into<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: 1024,
            tag: PromptTag::MethodologyInduction,
        }
    }
}

/// A completion backend.
pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String>;
}

pub fn prompt_sha256(prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    format!("{:x}", hasher.finalize())
}

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

/// One scripted response. Entries with a `prompt_sha256` are served on exact
/// prompt match; the rest form a FIFO queue per tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub tag: PromptTag,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
}

#[derive(Debug, Default)]
struct ScriptState {
    queues: HashMap<PromptTag, VecDeque<String>>,
    consumed: HashMap<PromptTag, usize>,
    by_hash: HashMap<String, String>,
}

/// Fully deterministic offline backend replaying a fixed script.
///
/// Single-consumer per script instance: concurrent callers are serialized on
/// an internal lock but the sequence semantics assume one episode at a time.
pub struct ScriptedClient {
    state: Mutex<ScriptState>,
}

impl ScriptedClient {
    pub fn new(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        let mut state = ScriptState::default();
        for entry in entries {
            match entry.prompt_sha256 {
                Some(hash) => {
                    state.by_hash.insert(hash, entry.response);
                }
                None => state
                    .queues
                    .entry(entry.tag)
                    .or_default()
                    .push_back(entry.response),
            }
        }
        ScriptedClient {
            state: Mutex::new(state),
        }
    }

    /// All responses answer action-selection prompts, in order.
    pub fn from_responses(responses: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self::new(responses.into_iter().map(|r| ScriptEntry {
            tag: PromptTag::ActionSelection,
            response: r.into(),
            prompt_sha256: None,
        }))
    }

    /// Load a script file: one JSON `ScriptEntry` per line.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptEntry = serde_json::from_str(line).map_err(|e| Error::Load {
                path: path.display().to_string(),
                line: lineno + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }
}

impl LlmClient for ScriptedClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let mut state = self.state.lock().expect("script lock");
        let hash = prompt_sha256(&request.prompt);
        if let Some(response) = state.by_hash.remove(&hash) {
            return Ok(response);
        }
        let index = *state.consumed.get(&request.tag).unwrap_or(&0);
        match state.queues.get_mut(&request.tag).and_then(VecDeque::pop_front) {
            Some(response) => {
                *state.consumed.entry(request.tag).or_insert(0) += 1;
                Ok(response)
            }
            None => Err(Error::ReplayMiss {
                key: format!("({}, {index})", request.tag.as_str()),
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Remote backend
// ---------------------------------------------------------------------------

/// Configuration for the remote chat-completion backend.
#[derive(Debug, Clone)]
pub struct RemoteLlmConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub retries: usize,
    /// Maximum concurrent in-flight requests.
    pub max_in_flight: usize,
}

impl Default for RemoteLlmConfig {
    fn default() -> Self {
        RemoteLlmConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo".into(),
            api_key_env: Some("OPENAI_API_KEY".into()),
            timeout_secs: 60,
            retries: 3,
            max_in_flight: 4,
        }
    }
}

/// Single-turn chat-completions request body.
pub fn chat_payload(model: &str, request: &CompletionRequest) -> serde_json::Value {
    serde_json::json!({
        "model": model,
        "messages": [{ "role": "user", "content": request.prompt }],
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    })
}

/// Pull the assistant text out of a chat-completions response body.
pub fn parse_chat_response(body: &serde_json::Value) -> Option<String> {
    body.get("choices")?
        .as_array()?
        .first()?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}

struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut permits = self.permits.lock().expect("semaphore lock");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore wait");
        }
        *permits -= 1;
    }

    fn release(&self) {
        *self.permits.lock().expect("semaphore lock") += 1;
        self.available.notify_one();
    }
}

/// Remote chat-completion client with bounded concurrency and retry with
/// linear backoff on transport errors, 429s, and 5xx responses.
pub struct RemoteLlmClient {
    config: RemoteLlmConfig,
    client: reqwest::blocking::Client,
    in_flight: Semaphore,
}

impl RemoteLlmClient {
    pub fn new(config: RemoteLlmConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Gateway {
                attempts: 0,
                message: e.to_string(),
            })?;
        let in_flight = Semaphore::new(config.max_in_flight);
        Ok(RemoteLlmClient {
            config,
            client,
            in_flight,
        })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn api_key(&self) -> Option<String> {
        self.config
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
    }

    fn try_once(&self, request: &CompletionRequest) -> std::result::Result<String, String> {
        let payload = chat_payload(&self.config.model, request);
        let mut builder = self.client.post(self.endpoint()).json(&payload);
        if let Some(key) = self.api_key() {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| e.to_string())?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(format!("HTTP {status}"));
        }
        if !status.is_success() {
            // Client errors are not retryable; surface them loudly.
            let body = response.text().unwrap_or_default();
            return Err(format!("HTTP {status} (fatal): {body}"));
        }
        let body: serde_json::Value = response.json().map_err(|e| e.to_string())?;
        parse_chat_response(&body).ok_or_else(|| "response carries no choices".to_string())
    }
}

impl LlmClient for RemoteLlmClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        self.in_flight.acquire();
        let result = (|| {
            let attempts_allowed = self.config.retries + 1;
            let mut last_error = String::new();
            for attempt in 1..=attempts_allowed {
                match self.try_once(request) {
                    Ok(text) => return Ok(text),
                    Err(message) => {
                        let fatal = message.contains("(fatal)");
                        last_error = message;
                        if fatal {
                            return Err(Error::Gateway {
                                attempts: attempt,
                                message: last_error,
                            });
                        }
                    }
                }
                if attempt < attempts_allowed {
                    std::thread::sleep(std::time::Duration::from_millis(200 * attempt as u64));
                }
            }
            Err(Error::Gateway {
                attempts: attempts_allowed,
                message: last_error,
            })
        })();
        self.in_flight.release();
        result
    }
}

// ---------------------------------------------------------------------------
// Run log
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct LogRecord<'a> {
    seq: usize,
    tag: &'a str,
    temperature: f64,
    prompt: &'a str,
    response: Option<&'a str>,
    error: Option<String>,
}

/// Append-only JSONL log of every request/response pair.
pub struct RequestLog {
    writer: Mutex<(usize, BufWriter<File>)>,
}

impl RequestLog {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path)?;
        Ok(RequestLog {
            writer: Mutex::new((0, BufWriter::new(file))),
        })
    }

    fn append(&self, request: &CompletionRequest, outcome: &Result<String>) {
        let mut guard = self.writer.lock().expect("log lock");
        let (seq, writer) = &mut *guard;
        let record = LogRecord {
            seq: *seq,
            tag: request.tag.as_str(),
            temperature: request.temperature,
            prompt: &request.prompt,
            response: outcome.as_ref().ok().map(String::as_str),
            error: outcome.as_ref().err().map(|e| e.to_string()),
        };
        *seq += 1;
        if let Ok(line) = serde_json::to_string(&record) {
            let _ = writeln!(writer, "{line}");
            let _ = writer.flush();
        }
    }
}

/// Wraps any backend and mirrors traffic into a [`RequestLog`].
pub struct LoggingLlm {
    inner: Arc<dyn LlmClient>,
    log: Arc<RequestLog>,
}

impl LoggingLlm {
    pub fn new(inner: Arc<dyn LlmClient>, log: Arc<RequestLog>) -> Self {
        LoggingLlm { inner, log }
    }
}

impl LlmClient for LoggingLlm {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let outcome = self.inner.complete(request);
        self.log.append(request, &outcome);
        outcome
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_responses_are_served_once_then_miss() {
        let client = ScriptedClient::from_responses(["$answer(2014-10)$"]);
        let req = CompletionRequest::action_selection("whatever");
        assert_eq!(client.complete(&req).unwrap(), "$answer(2014-10)$");
        let err = client.complete(&req).unwrap_err();
        assert!(matches!(err, Error::ReplayMiss { ref key } if key.contains("action_selection")));
    }

    #[test]
    fn scripted_queues_are_keyed_by_tag() {
        let client = ScriptedClient::new([
            ScriptEntry {
                tag: PromptTag::MethodologyInduction,
                response: "the method".into(),
                prompt_sha256: None,
            },
            ScriptEntry {
                tag: PromptTag::ActionSelection,
                response: "$getFirst({entities})$".into(),
                prompt_sha256: None,
            },
        ]);
        let action = CompletionRequest::action_selection("p");
        let induction = CompletionRequest::methodology_induction("p");
        assert_eq!(client.complete(&action).unwrap(), "$getFirst({entities})$");
        assert_eq!(client.complete(&induction).unwrap(), "the method");
    }

    #[test]
    fn prompt_hash_entries_match_exact_prompts() {
        let prompt = "the exact prompt";
        let client = ScriptedClient::new([ScriptEntry {
            tag: PromptTag::ActionSelection,
            response: "hashed".into(),
            prompt_sha256: Some(prompt_sha256(prompt)),
        }]);
        let req = CompletionRequest::action_selection(prompt);
        assert_eq!(client.complete(&req).unwrap(), "hashed");
    }

    #[test]
    fn action_selection_payload_defaults_to_temperature_zero() {
        let req = CompletionRequest::action_selection("pick one");
        let payload = chat_payload("test-model", &req);
        assert_eq!(payload["temperature"], serde_json::json!(0.0));
        assert_eq!(payload["messages"][0]["role"], "user");
        assert_eq!(payload["messages"][0]["content"], "pick one");
        assert_eq!(payload["model"], "test-model");
    }

    #[test]
    fn chat_response_text_is_extracted() {
        let body = serde_json::json!({
            "choices": [{ "message": { "role": "assistant", "content": "hello" } }]
        });
        assert_eq!(parse_chat_response(&body).as_deref(), Some("hello"));
        assert_eq!(parse_chat_response(&serde_json::json!({})), None);
    }

    #[test]
    fn request_log_captures_the_prompt_stream() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("llm_log.jsonl");
        let log = Arc::new(RequestLog::create(&path).unwrap());
        let client = LoggingLlm::new(
            Arc::new(ScriptedClient::from_responses(["a", "b"])),
            log,
        );
        let req = CompletionRequest::action_selection("prompt one");
        client.complete(&req).unwrap();
        client.complete(&req).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(first["seq"], 0);
        assert_eq!(first["prompt"], "prompt one");
        assert_eq!(first["response"], "a");
    }
}
