//! Chat-completion client for hosted listwise rankers.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::prompt::{render, rendered_chars, ChatMessage, PromptStyle};
use super::{RankRequest, Ranker, RankerError, RankerOutput};

pub const DEFAULT_CREDENTIAL_ENV: &str = "PSC_API_KEY";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RemoteError {
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error("authentication failed with HTTP {status}")]
    Authentication { status: u16 },
    #[error("endpoint returned non-retryable HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("rendered prompt has {chars} characters, budget is {budget}")]
    PromptTooLong { chars: usize, budget: usize },
    #[error("malformed completion response: {0}")]
    InvalidResponse(String),
    #[error("audit log: {0}")]
    Audit(String),
    #[error("cannot build HTTP client: {0}")]
    Client(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: f64,
    pub max_in_flight: usize,
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    /// Name of the environment variable holding the bearer token.
    pub credential_env: String,
    /// Reject prompts longer than this many characters.
    pub char_budget: Option<usize>,
    /// Append request/response pairs to this JSONL file.
    pub audit_log: Option<PathBuf>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://localhost:8000/v1".into(),
            model: String::new(),
            temperature: 0.0,
            timeout_secs: 120.0,
            max_in_flight: 20,
            max_attempts: 5,
            initial_backoff_ms: 500,
            credential_env: DEFAULT_CREDENTIAL_ENV.into(),
            char_budget: None,
            audit_log: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Sends one JSON POST. `Err` means the request never produced a status.
pub trait Transport: Send + Sync {
    fn post(&self, url: &str, bearer: &str, body: &Value, timeout: Duration) -> Result<HttpReply, String>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder().build().map_err(|e| e.to_string())?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn post(&self, url: &str, bearer: &str, body: &Value, timeout: Duration) -> Result<HttpReply, String> {
        let response = self
            .client
            .post(url)
            .bearer_auth(bearer)
            .timeout(timeout)
            .json(body)
            .send()
            .map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChatReply {
    pub text: String,
    pub attempts: u32,
}

pub struct ChatClient {
    config: EndpointConfig,
    credential: String,
    transport: Arc<dyn Transport>,
    audit: Option<Mutex<File>>,
}

impl ChatClient {
    /// Client over HTTP with the credential read from the configured variable.
    pub fn from_env(config: EndpointConfig) -> Result<Self, RemoteError> {
        let credential =
            std::env::var(&config.credential_env).map_err(|_| RemoteError::MissingCredential(config.credential_env.clone()))?;
        let transport = HttpTransport::new().map_err(RemoteError::Client)?;
        ChatClient::with_transport(config, credential, Arc::new(transport))
    }

    pub fn with_transport(
        config: EndpointConfig,
        credential: impl Into<String>,
        transport: Arc<dyn Transport>,
    ) -> Result<Self, RemoteError> {
        let audit = match &config.audit_log {
            Some(path) => Some(Mutex::new(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| RemoteError::Audit(format!("{}: {e}", path.display())))?,
            )),
            None => None,
        };
        Ok(ChatClient {
            config,
            credential: credential.into(),
            transport,
            audit,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn log_exchange(&self, request: &Value, reply: &Result<HttpReply, String>) {
        let Some(audit) = &self.audit else { return };
        let record = match reply {
            Ok(r) => json!({"request": request, "status": r.status, "response": r.body}),
            Err(e) => json!({"request": request, "error": e}),
        };
        let mut file = audit.lock().unwrap_or_else(|p| p.into_inner());
        if let Err(e) = writeln!(file, "{record}") {
            warn!("audit log write failed: {e}");
        }
    }

    /// Send one chat completion, retrying transient failures with
    /// exponential backoff.
    pub fn complete(&self, messages: &[ChatMessage]) -> Result<ChatReply, RemoteError> {
        if let Some(budget) = self.config.char_budget {
            let chars = rendered_chars(messages);
            if chars > budget {
                return Err(RemoteError::PromptTooLong { chars, budget });
            }
        }
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
        });
        let url = self.url();
        let timeout = Duration::from_secs_f64(self.config.timeout_secs);
        let max_attempts = self.config.max_attempts.max(1);
        let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
        let mut last = String::new();
        for attempt in 1..=max_attempts {
            let reply = self.transport.post(&url, &self.credential, &body, timeout);
            self.log_exchange(&body, &reply);
            match reply {
                Ok(HttpReply { status: 200..=299, body }) => {
                    if attempt > 1 {
                        info!("completion succeeded after {attempt} attempts");
                    }
                    return Ok(ChatReply {
                        text: extract_content(&body)?,
                        attempts: attempt,
                    });
                }
                Ok(HttpReply {
                    status: status @ (401 | 403),
                    ..
                }) => return Err(RemoteError::Authentication { status }),
                Ok(HttpReply { status, body }) if status == 429 || status >= 500 => {
                    last = format!("HTTP {status}: {body}");
                }
                Ok(HttpReply { status, body }) => return Err(RemoteError::Status { status, body }),
                Err(e) => last = e,
            }
            warn!("attempt {attempt}/{max_attempts} failed: {last}");
            if attempt < max_attempts {
                thread::sleep(backoff);
                backoff *= 2;
            }
        }
        Err(RemoteError::RetriesExhausted {
            attempts: max_attempts,
            last,
        })
    }
}

/// `choices[0].message.content` of a chat-completion response.
pub fn extract_content(body: &str) -> Result<String, RemoteError> {
    let value: Value = serde_json::from_str(body).map_err(|e| RemoteError::InvalidResponse(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| RemoteError::InvalidResponse("missing choices[0].message.content".into()))
}

/// A hosted model prompted with one of the listwise templates.
#[derive(Clone)]
pub struct RemoteRanker {
    pub client: Arc<ChatClient>,
    pub style: PromptStyle,
}

impl RemoteRanker {
    pub fn new(client: impl Into<Arc<ChatClient>>, style: PromptStyle) -> Self {
        RemoteRanker {
            client: client.into(),
            style,
        }
    }

    /// The same client prompted with another template.
    pub fn with_style(&self, style: PromptStyle) -> Self {
        RemoteRanker {
            client: Arc::clone(&self.client),
            style,
        }
    }

    /// Render the prompt for `request` and return the raw reply text.
    pub fn remote_rank(&self, request: &RankRequest<'_>) -> Result<ChatReply, RemoteError> {
        self.client.complete(&render(self.style, request.items, request.query))
    }
}

impl Ranker for RemoteRanker {
    fn name(&self) -> String {
        format!("remote:{}", self.client.config.model)
    }

    fn temperature(&self) -> Option<f64> {
        Some(self.client.config.temperature)
    }

    fn style(&self) -> PromptStyle {
        self.style
    }

    fn max_in_flight(&self) -> usize {
        self.client.config.max_in_flight.max(1)
    }

    fn rank(&self, request: &RankRequest<'_>) -> Result<RankerOutput, RankerError> {
        Ok(RankerOutput::Text(self.remote_rank(request)?.text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::ItemList;
    use std::collections::VecDeque;

    struct Scripted {
        replies: Mutex<VecDeque<Result<HttpReply, String>>>,
        calls: Mutex<Vec<(String, String, Value)>>,
    }

    impl Scripted {
        fn new(replies: Vec<Result<HttpReply, String>>) -> Arc<Self> {
            Arc::new(Scripted {
                replies: Mutex::new(replies.into()),
                calls: Mutex::new(Vec::new()),
            })
        }

        fn calls(&self) -> usize {
            self.calls.lock().unwrap().len()
        }
    }

    impl Transport for Scripted {
        fn post(&self, url: &str, bearer: &str, body: &Value, _: Duration) -> Result<HttpReply, String> {
            self.calls.lock().unwrap().push((url.into(), bearer.into(), body.clone()));
            self.replies.lock().unwrap().pop_front().expect("unscripted call")
        }
    }

    fn ok(content: &str) -> Result<HttpReply, String> {
        Ok(HttpReply {
            status: 200,
            body: json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string(),
        })
    }

    fn status(code: u16) -> Result<HttpReply, String> {
        Ok(HttpReply {
            status: code,
            body: "nope".into(),
        })
    }

    fn config() -> EndpointConfig {
        EndpointConfig {
            base_url: "http://mock/v1/".into(),
            model: "m".into(),
            initial_backoff_ms: 0,
            max_attempts: 4,
            ..EndpointConfig::default()
        }
    }

    fn client(transport: Arc<Scripted>) -> ChatClient {
        ChatClient::with_transport(config(), "secret", transport).unwrap()
    }

    #[test]
    fn reply_text_is_passed_through() {
        let t = Scripted::new(vec![ok("[2] > [1] > [3]")]);
        let reply = client(t.clone()).complete(&[ChatMessage::user("hi")]).unwrap();
        assert_eq!(reply, ChatReply { text: "[2] > [1] > [3]".into(), attempts: 1 });
        let calls = t.calls.lock().unwrap();
        let (url, bearer, body) = &calls[0];
        assert_eq!(url, "http://mock/v1/chat/completions");
        assert_eq!(bearer, "secret");
        assert_eq!(body["messages"][0], json!({"role": "user", "content": "hi"}));
        assert_eq!(body["temperature"], json!(0.0));
    }

    #[test]
    fn transient_failures_are_retried() {
        let t = Scripted::new(vec![Err("connection reset".into()), status(503), ok("[1]")]);
        let reply = client(t.clone()).complete(&[ChatMessage::user("x")]).unwrap();
        assert_eq!(reply.attempts, 3);
        assert_eq!(t.calls(), 3);
    }

    #[test]
    fn bad_credentials_fail_fast() {
        let t = Scripted::new(vec![status(401), ok("never")]);
        let err = client(t.clone()).complete(&[ChatMessage::user("x")]).unwrap_err();
        assert_eq!(err, RemoteError::Authentication { status: 401 });
        assert_eq!(t.calls(), 1);
    }

    #[test]
    fn errors_are_distinct() {
        let t = Scripted::new(vec![status(400)]);
        assert!(matches!(
            client(t).complete(&[ChatMessage::user("x")]),
            Err(RemoteError::Status { status: 400, .. })
        ));
        let t = Scripted::new(vec![status(429), status(500), status(502), status(503)]);
        assert!(matches!(
            client(t.clone()).complete(&[ChatMessage::user("x")]),
            Err(RemoteError::RetriesExhausted { attempts: 4, .. })
        ));
        assert_eq!(t.calls(), 4);
        let t = Scripted::new(vec![Ok(HttpReply { status: 200, body: "{}".into() })]);
        assert!(matches!(
            client(t).complete(&[ChatMessage::user("x")]),
            Err(RemoteError::InvalidResponse(_))
        ));
    }

    #[test]
    fn char_budget_is_enforced_before_sending() {
        let t = Scripted::new(vec![]);
        let cfg = EndpointConfig {
            char_budget: Some(3),
            ..config()
        };
        let c = ChatClient::with_transport(cfg, "k", t.clone()).unwrap();
        assert_eq!(
            c.complete(&[ChatMessage::user("four")]),
            Err(RemoteError::PromptTooLong { chars: 4, budget: 3 })
        );
        assert_eq!(t.calls(), 0);
    }

    #[test]
    fn missing_credential_is_reported() {
        let cfg = EndpointConfig {
            credential_env: "PSC_TEST_SURELY_UNSET_VARIABLE".into(),
            ..config()
        };
        assert!(matches!(
            ChatClient::from_env(cfg),
            Err(RemoteError::MissingCredential(v)) if v == "PSC_TEST_SURELY_UNSET_VARIABLE"
        ));
    }

    #[test]
    fn ranker_renders_prompt_and_logs_audit() {
        let dir = std::env::temp_dir().join(format!("psc-audit-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let log = dir.join("audit.jsonl");
        let _ = std::fs::remove_file(&log);
        let t = Scripted::new(vec![ok("[2] > [1]")]);
        let cfg = EndpointConfig {
            audit_log: Some(log.clone()),
            ..config()
        };
        let ranker = RemoteRanker::new(ChatClient::with_transport(cfg, "k", t.clone()).unwrap(), PromptStyle::RankGpt);
        let items = ItemList::from_texts(["p one", "p two"]);
        let req = RankRequest {
            items: &items,
            query: Some("q"),
            seed: 0,
        };
        assert_eq!(ranker.rank(&req).unwrap(), RankerOutput::Text("[2] > [1]".into()));
        assert_eq!(ranker.temperature(), Some(0.0));
        assert_eq!(ranker.max_in_flight(), 20);
        let sent = &t.calls.lock().unwrap()[0].2;
        assert_eq!(sent["messages"].as_array().unwrap().len(), 2);
        assert!(sent["messages"][1]["content"].as_str().unwrap().contains("[2] p two"));
        let audit = std::fs::read_to_string(&log).unwrap();
        assert_eq!(audit.lines().count(), 1);
        let record: Value = serde_json::from_str(audit.trim()).unwrap();
        assert_eq!(record["status"], json!(200));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
