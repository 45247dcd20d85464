//! Chat-completion backends.
//!
//! [`HttpBackend`] talks to an OpenAI-compatible `/chat/completions`
//! endpoint. [`ReplayBackend`] and [`RecordingBackend`] store and replay
//! exchanges as JSON fixtures keyed by the SHA-256 of the wire body.
//! [`MockBackend`] and [`ScriptedBackend`] are offline stand-ins.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinishReason {
    Complete,
    LengthCapped,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub finish_reason: FinishReason,
}

impl CompletionResponse {
    pub fn complete(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            finish_reason: FinishReason::Complete,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected backend response: {0}")]
    InvalidResponse(String),
    #[error("no recorded fixture {0}")]
    MissingFixture(String),
    #[error("fixture store: {0}")]
    Fixture(String),
    #[error("mock backend: {0}")]
    Mock(String),
}

pub trait CompletionBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub role: String,
    pub content: String,
}

/// JSON body POSTed to the chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub model: String,
    pub messages: Vec<WireMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl WireRequest {
    pub fn new(model: &str, request: &CompletionRequest) -> Self {
        let mut messages = Vec::with_capacity(2);
        if !request.system.is_empty() {
            messages.push(WireMessage {
                role: "system".into(),
                content: request.system.clone(),
            });
        }
        messages.push(WireMessage {
            role: "user".into(),
            content: request.user.clone(),
        });
        Self {
            model: model.to_string(),
            messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        }
    }

    /// Stable fixture key: hex SHA-256 of the compact JSON body.
    pub fn fixture_key(&self) -> String {
        let body = serde_json::to_vec(self).expect("wire request serializes");
        hex::encode(Sha256::digest(body))
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            base_delay: Duration::from_millis(500),
        }
    }
}

pub const DEFAULT_CREDENTIAL_ENV: &str = "ELICIT_API_KEY";

pub struct HttpBackend {
    http: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: String,
    retry: RetryPolicy,
}

impl HttpBackend {
    pub fn new(endpoint: &str, model: &str, api_key: &str, timeout: Duration) -> Result<Self, BackendError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self {
            http,
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key: api_key.to_string(),
            retry: RetryPolicy::default(),
        })
    }

    /// Reads the bearer token from `env_var` before any network traffic.
    pub fn from_env(endpoint: &str, model: &str, env_var: &str, timeout: Duration) -> Result<Self, BackendError> {
        let key = std::env::var(env_var)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| BackendError::MissingCredential(env_var.to_string()))?;
        Self::new(endpoint, model, &key, timeout)
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn attempt(&self, body: &WireRequest) -> Result<CompletionResponse, BackendError> {
        let resp = self
            .http
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(BackendError::Status {
                status: status.as_u16(),
                body,
            });
        }
        let parsed: WireResponse = resp
            .json()
            .map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::InvalidResponse("no choices".into()))?;
        let finish_reason = match choice.finish_reason.as_deref() {
            Some("length") => FinishReason::LengthCapped,
            _ => FinishReason::Complete,
        };
        if finish_reason == FinishReason::Complete && choice.message.content.trim().is_empty() {
            return Err(BackendError::InvalidResponse("empty completion".into()));
        }
        Ok(CompletionResponse {
            text: choice.message.content,
            finish_reason,
        })
    }
}

fn retryable(err: &BackendError) -> bool {
    match err {
        BackendError::Transport(_) => true,
        BackendError::Status { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let body = WireRequest::new(&self.model, request);
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Err(e) if retryable(&e) && attempt + 1 < self.retry.max_attempts => {
                    let delay = self.retry.base_delay * 2u32.pow(attempt);
                    log::warn!("backend call failed ({e}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub request: WireRequest,
    pub response: CompletionResponse,
}

fn fixture_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.json"))
}

/// Serves recorded responses; never touches the network.
pub struct ReplayBackend {
    dir: PathBuf,
    model: String,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<PathBuf>, model: &str) -> Self {
        Self {
            dir: dir.into(),
            model: model.to_string(),
        }
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let wire = WireRequest::new(&self.model, request);
        let key = wire.fixture_key();
        let path = fixture_path(&self.dir, &key);
        let raw = fs::read_to_string(&path).map_err(|_| BackendError::MissingFixture(key.clone()))?;
        let fixture: Fixture =
            serde_json::from_str(&raw).map_err(|e| BackendError::Fixture(format!("{}: {e}", path.display())))?;
        if fixture.request != wire {
            return Err(BackendError::Fixture(format!(
                "{} does not match the request body",
                path.display()
            )));
        }
        Ok(fixture.response)
    }
}

/// Forwards to `inner` and writes every successful exchange as a fixture.
pub struct RecordingBackend<B> {
    inner: B,
    dir: PathBuf,
    model: String,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>, model: &str) -> Self {
        Self {
            inner,
            dir: dir.into(),
            model: model.to_string(),
        }
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let response = self.inner.complete(request)?;
        let fixture = Fixture {
            request: WireRequest::new(&self.model, request),
            response: response.clone(),
        };
        fs::create_dir_all(&self.dir).map_err(|e| BackendError::Fixture(e.to_string()))?;
        let path = fixture_path(&self.dir, &fixture.request.fixture_key());
        let body = serde_json::to_string_pretty(&fixture).expect("fixture serializes");
        fs::write(&path, body).map_err(|e| BackendError::Fixture(format!("{}: {e}", path.display())))?;
        Ok(response)
    }
}

/// Returns queued responses in order and records every request it sees.
#[derive(Default)]
pub struct ScriptedBackend {
    replies: Mutex<VecDeque<Result<CompletionResponse, BackendError>>>,
    seen: Mutex<Vec<CompletionRequest>>,
}

impl ScriptedBackend {
    pub fn new<I>(replies: I) -> Self
    where
        I: IntoIterator<Item = Result<CompletionResponse, BackendError>>,
    {
        Self {
            replies: Mutex::new(replies.into_iter().collect()),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn texts<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(texts.into_iter().map(|t| Ok(CompletionResponse::complete(t))))
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.seen.lock().unwrap().clone()
    }

    pub fn calls(&self) -> usize {
        self.seen.lock().unwrap().len()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        self.seen.lock().unwrap().push(request.clone());
        self.replies
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(BackendError::Mock("no scripted reply left".into())))
    }
}

/// Deterministic offline generator. Answers outline prompts with a fixed
/// five-section plan and section prompts with templated turns built from
/// the section header fields of the prompt.
#[derive(Debug, Default)]
pub struct MockBackend {
    calls: Mutex<usize>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> usize {
        *self.calls.lock().unwrap()
    }
}

fn header_field<'a>(prompt: &'a str, name: &str) -> Option<&'a str> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix(name).and_then(|r| r.strip_prefix(':')))
        .map(str::trim)
}

fn section_header_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\d+) of (\d+) — (.+)$").unwrap())
}

impl MockBackend {
    fn outline(scenario: &str) -> String {
        format!(
            "1. Greeting and introductions — build rapport and explain the purpose of the interview (turns: 4)\n\
             2. Current process — understand how the stakeholder handles {scenario} tasks today (turns: 6)\n\
             3. Envisioned features — explore what the new {scenario} should offer (turns: 8)\n\
             4. Other stakeholders and constraints — identify other users, priorities and limits (turns: 6)\n\
             5. Closing — summarize the discussion and confirm it with the stakeholder (turns: 4)\n"
        )
    }

    fn section(prompt: &str) -> Result<String, BackendError> {
        let scenario = header_field(prompt, "Scenario").unwrap_or("the system");
        let header = header_field(prompt, "Section")
            .ok_or_else(|| BackendError::Mock("section prompt without a Section line".into()))?;
        let caps = section_header_regex()
            .captures(header)
            .ok_or_else(|| BackendError::Mock(format!("unreadable section header `{header}`")))?;
        let number: usize = caps[1].parse().unwrap_or(1);
        let total: usize = caps[2].parse().unwrap_or(1);
        let title = caps[3].trim().to_lowercase();
        let goal = header_field(prompt, "Goal").unwrap_or("cover this topic").trim_end_matches('.');
        let target: usize = header_field(prompt, "Target turns")
            .and_then(|t| t.parse().ok())
            .unwrap_or(4)
            .max(2);

        let mut lines = Vec::with_capacity(target);
        for i in 0..target {
            let interviewer = i % 2 == 0;
            let exchange = i / 2 + 1;
            let text = match (interviewer, number, i) {
                (true, 1, 0) => format!(
                    "Hello, thank you for meeting with me today. I would like to talk about the {scenario} and {goal}. Could you start by telling me about your role?"
                ),
                (true, n, _) if n == total && i + 2 >= target => format!(
                    "To summarize, we covered {title} for the {scenario}. Does that sound correct, and is there anything to add?"
                ),
                (true, _, _) => format!(
                    "Regarding {title}, what matters most to you about point {exchange} when we {goal}?"
                ),
                (false, n, _) if n == total && i + 1 >= target => {
                    "Yes, that sounds correct. Thank you for listening so carefully.".to_string()
                }
                (false, n, 1) if n > 1 && n < total => format!(
                    "For {title}, the main thing is that our team relies on the {scenario} every day. Will the new version keep working the way we are used to?"
                ),
                (false, _, _) => format!(
                    "For {title}, point {exchange} is important because our team relies on the {scenario} every day and we need it to be reliable."
                ),
            };
            let speaker = if interviewer { "Interviewer" } else { "Stakeholder" };
            lines.push(format!("{speaker}: {text}"));
        }
        Ok(lines.join("\n"))
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        *self.calls.lock().unwrap() += 1;
        let prompt = &request.user;
        let text = match prompt.lines().next().map(str::trim) {
            Some("Task: interview outline") => {
                Self::outline(header_field(prompt, "Scenario").unwrap_or("system"))
            }
            Some("Task: interview section") => Self::section(prompt)?,
            other => {
                return Err(BackendError::Mock(format!(
                    "unrecognized prompt starting with {other:?}"
                )))
            }
        };
        Ok(CompletionResponse::complete(text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(user: &str) -> CompletionRequest {
        CompletionRequest {
            system: "sys".into(),
            user: user.into(),
            temperature: 0.7,
            max_tokens: 800,
        }
    }

    #[test]
    fn wire_body_shape() {
        let w = WireRequest::new("gpt-4o", &req("hello"));
        let v = serde_json::to_value(&w).unwrap();
        assert_eq!(v["model"], "gpt-4o");
        assert_eq!(v["messages"][0]["role"], "system");
        assert_eq!(v["messages"][1]["content"], "hello");
        assert_eq!(v["max_tokens"], 800);
        assert_eq!(w.fixture_key(), WireRequest::new("gpt-4o", &req("hello")).fixture_key());
        assert_ne!(w.fixture_key(), WireRequest::new("gpt-4o", &req("hello!")).fixture_key());
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let rec = RecordingBackend::new(ScriptedBackend::texts(["one"]), dir.path(), "m");
        assert_eq!(rec.complete(&req("a")).unwrap().text, "one");
        let replay = ReplayBackend::new(dir.path(), "m");
        assert_eq!(replay.complete(&req("a")).unwrap().text, "one");
        assert!(matches!(
            replay.complete(&req("b")),
            Err(BackendError::MissingFixture(_))
        ));
        // a different model is a different key
        assert!(ReplayBackend::new(dir.path(), "other").complete(&req("a")).is_err());
    }

    #[test]
    fn scripted_runs_out() {
        let b = ScriptedBackend::texts(["x"]);
        assert!(b.complete(&req("1")).is_ok());
        assert!(b.complete(&req("2")).is_err());
        assert_eq!(b.calls(), 2);
    }

    #[test]
    fn mock_rejects_unknown_prompt() {
        assert!(MockBackend::new().complete(&req("hello")).is_err());
    }

    #[test]
    fn missing_credential() {
        let err = HttpBackend::from_env("http://localhost:9", "m", "ELICIT_TEST_UNSET_VAR", Duration::from_secs(1))
            .err()
            .unwrap();
        assert_eq!(err, BackendError::MissingCredential("ELICIT_TEST_UNSET_VAR".into()));
    }
}
