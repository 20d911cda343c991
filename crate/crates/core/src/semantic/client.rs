use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::parse::FormatError;
use super::prompt::{Prompt, PromptLevel};
use super::stub::stub_reply;
use super::Vocabulary;

pub const ENV_ENDPOINT: &str = "SELROS_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "SELROS_LLM_API_KEY";
pub const ENV_MODEL: &str = "SELROS_LLM_MODEL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Stub,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stub" => Ok(BackendKind::Stub),
            "http" => Ok(BackendKind::Http),
            other => Err(format!("unknown LLM backend {other:?}")),
        }
    }
}

/// A string that never shows up in `Debug` output or serialized configs.
#[derive(Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(transparent)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub backend: BackendKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    #[serde(skip_serializing)]
    pub api_key: Option<Secret>,
    pub max_retries: u32,
    /// Seconds per HTTP request.
    pub timeout: f64,
    pub temperature: f64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Stub,
            endpoint: None,
            model: None,
            api_key: None,
            max_retries: 2,
            timeout: 60.0,
            temperature: 0.0,
        }
    }
}

impl LlmConfig {
    /// Fills unset endpoint, model and key from the `SELROS_LLM_*`
    /// environment variables.
    pub fn fill_from_env(&mut self) {
        let var = |name| std::env::var(name).ok().filter(|v: &String| !v.trim().is_empty());
        if self.endpoint.is_none() {
            self.endpoint = var(ENV_ENDPOINT);
        }
        if self.model.is_none() {
            self.model = var(ENV_MODEL);
        }
        if self.api_key.is_none() {
            self.api_key = var(ENV_API_KEY).map(Secret);
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.backend == BackendKind::Http {
            if self.endpoint.as_deref().is_none_or(str::is_empty) {
                return Err(format!("HTTP backend needs an endpoint (set {ENV_ENDPOINT} or llm.endpoint)"));
            }
            if self.model.as_deref().is_none_or(str::is_empty) {
                return Err(format!("HTTP backend needs a model (set {ENV_MODEL} or llm.model)"));
            }
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(format!("timeout must be positive, got {}", self.timeout));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: "assistant".into(), content: content.into() }
    }
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct BackendError(pub String);

/// Something that answers a chat conversation. Implementations must be
/// callable from several threads at once.
pub trait ChatBackend: Send + Sync {
    /// `messages` is the full conversation so far; `prompt` is the structured
    /// prompt it was built from.
    fn complete(&self, prompt: &Prompt, messages: &[ChatMessage]) -> Result<String, BackendError>;
}

/// Offline backend answering from [`stub_classify`](super::stub_classify)'s
/// rules.
#[derive(Debug, Clone, Default)]
pub struct StubBackend {
    vocabulary: Vocabulary,
}

impl StubBackend {
    pub fn new(vocabulary: Vocabulary) -> Self {
        Self { vocabulary }
    }
}

impl ChatBackend for StubBackend {
    fn complete(&self, prompt: &Prompt, _messages: &[ChatMessage]) -> Result<String, BackendError> {
        Ok(stub_reply(prompt.level, &prompt.data_text, &self.vocabulary))
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

/// Chat-completions client for OpenAI-compatible endpoints.
pub struct HttpBackend {
    url: String,
    model: String,
    api_key: Option<Secret>,
    temperature: f64,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: &LlmConfig) -> Result<Self, String> {
        config.validate()?;
        let endpoint = config.endpoint.clone().unwrap_or_default();
        let endpoint = endpoint.trim_end_matches('/');
        let url = if endpoint.ends_with("chat/completions") {
            endpoint.to_string()
        } else {
            format!("{endpoint}/chat/completions")
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout)))
            .http_status_as_error(true)
            .build()
            .into();
        Ok(Self {
            url,
            model: config.model.clone().unwrap_or_default(),
            api_key: config.api_key.clone(),
            temperature: config.temperature,
            agent,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, _prompt: &Prompt, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let body = WireRequest { model: &self.model, messages, temperature: self.temperature };
        let mut request = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {}", key.expose()));
        }
        let mut response = request.send_json(&body).map_err(|e| BackendError(format!("POST {}: {e}", self.url)))?;
        let wire: WireResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError(format!("bad completion body: {e}")))?;
        wire.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError("completion has no content".into()))
    }
}

/// JSON-lines audit log of every request/response pair.
pub struct Transcript {
    file: Mutex<File>,
}

#[derive(Serialize)]
struct TranscriptEntry<'a> {
    level: PromptLevel,
    attempt: u32,
    messages: &'a [ChatMessage],
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl Transcript {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file: Mutex::new(file) })
    }

    fn record(&self, entry: &TranscriptEntry<'_>) {
        let mut line = serde_json::to_string(entry).expect("transcript entries serialize");
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        if let Err(e) = file.write_all(line.as_bytes()) {
            log::warn!("cannot append to transcript: {e}");
        }
    }
}

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("LLM unavailable after {attempts} attempts: {last_error}")]
    LlmUnavailable { attempts: u32, last_error: String },
    #[error("LLM reply still malformed after {attempts} attempts: {error}")]
    PersistentFormatError { attempts: u32, error: FormatError, last_reply: String },
}

/// Sends prompts to a backend with bounded retries. A malformed reply is
/// fed back as an assistant turn followed by a correction request; transport
/// failures are retried with the same conversation.
pub struct LlmClient {
    backend: Box<dyn ChatBackend>,
    max_retries: u32,
    transcript: Option<Transcript>,
}

impl LlmClient {
    pub fn new(backend: Box<dyn ChatBackend>, max_retries: u32) -> Self {
        Self { backend, max_retries, transcript: None }
    }

    pub fn from_config(config: &LlmConfig, vocabulary: &Vocabulary) -> Result<Self, String> {
        config.validate()?;
        let backend: Box<dyn ChatBackend> = match config.backend {
            BackendKind::Stub => Box::new(StubBackend::new(vocabulary.clone())),
            BackendKind::Http => Box::new(HttpBackend::new(config)?),
        };
        Ok(Self::new(backend, config.max_retries))
    }

    pub fn with_transcript(mut self, transcript: Transcript) -> Self {
        self.transcript = Some(transcript);
        self
    }

    pub fn max_retries(&self) -> u32 {
        self.max_retries
    }

    /// Raw reply text, retrying only on transport failure.
    pub fn query(&self, prompt: &Prompt) -> Result<String, QueryError> {
        self.query_with(prompt, |text| Ok(text.to_string())).map(|(reply, _)| reply)
    }

    /// Queries until `parse` accepts the reply or retries run out. Returns the
    /// parsed value and the raw reply it came from.
    pub fn query_with<T>(
        &self,
        prompt: &Prompt,
        parse: impl Fn(&str) -> Result<T, FormatError>,
    ) -> Result<(T, String), QueryError> {
        let mut messages = vec![ChatMessage::system(&prompt.role_text), ChatMessage::user(prompt.user_text())];
        let mut last_failure: Option<Result<(FormatError, String), String>> = None;
        let attempts = self.max_retries + 1;
        for attempt in 1..=attempts {
            let reply = self.backend.complete(prompt, &messages);
            if let Some(t) = &self.transcript {
                t.record(&TranscriptEntry {
                    level: prompt.level,
                    attempt,
                    messages: &messages,
                    response: reply.as_ref().ok().map(String::as_str),
                    error: reply.as_ref().err().map(ToString::to_string),
                });
            }
            match reply {
                Err(e) => {
                    log::warn!("LLM attempt {attempt}/{attempts} failed: {e}");
                    last_failure = Some(Err(e.0));
                }
                Ok(text) => match parse(&text) {
                    Ok(value) => return Ok((value, text)),
                    Err(error) => {
                        log::warn!("LLM attempt {attempt}/{attempts} malformed: {error}");
                        messages.push(ChatMessage::assistant(text.clone()));
                        messages.push(ChatMessage::user(correction(&error)));
                        last_failure = Some(Ok((error, text)));
                    }
                },
            }
        }
        Err(match last_failure.expect("at least one attempt is made") {
            Err(last_error) => QueryError::LlmUnavailable { attempts, last_error },
            Ok((error, last_reply)) => QueryError::PersistentFormatError { attempts, error, last_reply },
        })
    }
}

fn correction(error: &FormatError) -> String {
    format!(
        "Your previous reply could not be used: {error}. Answer again, following the required answer \
         format exactly and adding nothing else."
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};
    use std::sync::Arc;

    fn prompt() -> Prompt {
        Prompt {
            role_text: "role".into(),
            instruction_text: "instr".into(),
            data_text: "Room 1\narea: 12.00 m2\nsize: 4.00 m x 3.00 m\nadjacent rooms: 0\nobjects: bed x1".into(),
            level: PromptLevel::RoomLevel,
        }
    }

    struct Scripted {
        replies: Vec<Result<String, String>>,
        calls: Arc<AtomicU32>,
        seen: Mutex<Vec<Vec<ChatMessage>>>,
    }

    impl ChatBackend for Scripted {
        fn complete(&self, _: &Prompt, messages: &[ChatMessage]) -> Result<String, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst) as usize;
            self.seen.lock().unwrap().push(messages.to_vec());
            let reply = &self.replies[n.min(self.replies.len() - 1)];
            reply.clone().map_err(BackendError)
        }
    }

    fn scripted(replies: Vec<Result<&str, &str>>) -> (Arc<AtomicU32>, Scripted) {
        let calls = Arc::new(AtomicU32::new(0));
        let replies = replies.into_iter().map(|r| r.map(String::from).map_err(String::from)).collect();
        (calls.clone(), Scripted { replies, calls, seen: Mutex::new(Vec::new()) })
    }

    fn parse_label(text: &str) -> Result<String, FormatError> {
        super::super::parse_room_response(text, &Vocabulary::default()).map(|(l, _)| l.to_string())
    }

    #[test]
    fn stub_needs_no_network() {
        let client = LlmClient::from_config(&LlmConfig::default(), &Vocabulary::default()).unwrap();
        let (label, _) = client.query_with(&prompt(), parse_label).unwrap();
        assert_eq!(label, "Bedroom");
    }

    #[test]
    fn corrective_turn_carries_malformed_reply() {
        let (calls, backend) = scripted(vec![Ok("it is a bedroom I think"), Ok("LABEL: Bedroom\nREASON: bed")]);
        let backend = Arc::new(backend);
        struct Shared(Arc<Scripted>);
        impl ChatBackend for Shared {
            fn complete(&self, p: &Prompt, m: &[ChatMessage]) -> Result<String, BackendError> {
                self.0.complete(p, m)
            }
        }
        let client = LlmClient::new(Box::new(Shared(backend.clone())), 2);
        let (label, raw) = client.query_with(&prompt(), parse_label).unwrap();
        assert_eq!(label, "Bedroom");
        assert!(raw.starts_with("LABEL"));
        assert_eq!(calls.load(Ordering::SeqCst), 2);
        let seen = backend.seen.lock().unwrap();
        assert_eq!(seen[0].len(), 2);
        assert_eq!(seen[1].len(), 4);
        assert_eq!(seen[1][2], ChatMessage::assistant("it is a bedroom I think"));
        assert_eq!(seen[1][3].role, "user");
    }

    #[test]
    fn retry_bound_for_format_errors() {
        let (calls, backend) = scripted(vec![Ok("nope")]);
        let client = LlmClient::new(Box::new(backend), 2);
        match client.query_with(&prompt(), parse_label) {
            Err(QueryError::PersistentFormatError { attempts: 3, last_reply, .. }) => assert_eq!(last_reply, "nope"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn transport_failures_become_unavailable() {
        let (calls, backend) = scripted(vec![Err("connection refused")]);
        let client = LlmClient::new(Box::new(backend), 0);
        assert!(matches!(client.query(&prompt()), Err(QueryError::LlmUnavailable { attempts: 1, .. })));
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn unreachable_endpoint() {
        let config = LlmConfig {
            backend: BackendKind::Http,
            endpoint: Some("http://127.0.0.1:9".into()),
            model: Some("m".into()),
            timeout: 2.0,
            ..Default::default()
        };
        let client = LlmClient::from_config(&config, &Vocabulary::default()).unwrap();
        assert!(matches!(client.query(&prompt()), Err(QueryError::LlmUnavailable { attempts: 3, .. })));
    }

    #[test]
    fn http_config_validation() {
        let mut config = LlmConfig { backend: BackendKind::Http, ..Default::default() };
        assert!(config.validate().is_err());
        config.endpoint = Some("http://localhost:1/v1".into());
        assert!(config.validate().is_err());
        config.model = Some("m".into());
        assert!(config.validate().is_ok());
        assert_eq!(HttpBackend::new(&config).unwrap().url(), "http://localhost:1/v1/chat/completions");
    }

    #[test]
    fn secrets_stay_hidden() {
        let config = LlmConfig { api_key: Some(Secret::new("sk-123")), ..Default::default() };
        assert!(!format!("{config:?}").contains("sk-123"));
        assert!(!serde_json::to_string(&config).unwrap().contains("sk-123"));
    }
}
