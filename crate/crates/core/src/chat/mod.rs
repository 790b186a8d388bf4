//! Blocking client for OpenAI-compatible chat-completion endpoints.

use base64::Engine as _;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use std::sync::Mutex;
use std::time::Duration;
use thiserror::Error;

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "GRASPMAS_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text {
        text: String,
    },
    Image {
        media_type: String,
        data_b64: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn text(role: Role, text: impl Into<String>) -> Self {
        Self {
            role,
            content: vec![ContentPart::Text { text: text.into() }],
        }
    }

    pub fn system(text: impl Into<String>) -> Self {
        Self::text(Role::System, text)
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self::text(Role::User, text)
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self::text(Role::Assistant, text)
    }

    /// A user message carrying text followed by a PNG image.
    pub fn user_with_png(text: impl Into<String>, png: &[u8]) -> Self {
        Self {
            role: Role::User,
            content: vec![
                ContentPart::Text { text: text.into() },
                ContentPart::Image {
                    media_type: "image/png".into(),
                    data_b64: base64::engine::general_purpose::STANDARD.encode(png),
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<(), ChatError> {
        if self.content.is_empty() {
            return Err(ChatError::InvalidMessage(format!(
                "{} message has no content",
                self.role.as_str()
            )));
        }
        let has_image = self
            .content
            .iter()
            .any(|p| matches!(p, ContentPart::Image { .. }));
        if has_image && self.role != Role::User {
            return Err(ChatError::InvalidMessage(format!(
                "image parts are only allowed on user messages, not {}",
                self.role.as_str()
            )));
        }
        Ok(())
    }

    /// Concatenated text parts.
    pub fn plain_text(&self) -> String {
        self.content
            .iter()
            .filter_map(|p| match p {
                ContentPart::Text { text } => Some(text.as_str()),
                ContentPart::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn wire(&self) -> Json {
        let content = match self.content.as_slice() {
            [ContentPart::Text { text }] => Json::String(text.clone()),
            parts => Json::Array(
                parts
                    .iter()
                    .map(|p| match p {
                        ContentPart::Text { text } => json!({ "type": "text", "text": text }),
                        ContentPart::Image {
                            media_type,
                            data_b64,
                        } => json!({
                            "type": "image_url",
                            "image_url": { "url": format!("data:{media_type};base64,{data_b64}") }
                        }),
                    })
                    .collect(),
            ),
        };
        json!({ "role": self.role.as_str(), "content": content })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the first retry, in seconds; doubles on each retry.
    pub backoff_base_secs: f64,
    /// Each delay is stretched by a random factor in `[1, 1 + jitter)`.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff_base_secs: 1.0,
            jitter: 0.5,
            seed: 0,
        }
    }
}

impl RetryPolicy {
    pub fn validate(&self) -> Result<(), ChatError> {
        if self.max_attempts < 1 {
            return Err(ChatError::InvalidConfig(
                "max_attempts must be at least 1".into(),
            ));
        }
        if !(self.backoff_base_secs.is_finite() && self.backoff_base_secs >= 0.0) {
            return Err(ChatError::InvalidConfig(
                "backoff_base_secs must be non-negative".into(),
            ));
        }
        // jitter above 1 could let a delay undercut its predecessor
        if !(0.0..=1.0).contains(&self.jitter) {
            return Err(ChatError::InvalidConfig("jitter must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Delays before retries 1, 2, ... (one fewer than `max_attempts`).
    pub fn delays(&self) -> Vec<Duration> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (1..self.max_attempts)
            .map(|k| {
                let u: f64 = rng.random_range(0.0..1.0);
                let secs =
                    self.backoff_base_secs * 2f64.powi(k as i32 - 1) * (1.0 + self.jitter * u);
                Duration::from_secs_f64(secs)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(skip)]
    pub api_key: Option<String>,
}

fn default_max_tokens() -> u32 {
    2048
}

fn default_timeout() -> f64 {
    60.0
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
            api_key: None,
        }
    }

    /// Reads the API key from the environment, if set.
    pub fn with_env_key(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }

    pub fn validate(&self) -> Result<(), ChatError> {
        if self.base_url.trim().is_empty() {
            return Err(ChatError::InvalidConfig("base_url is empty".into()));
        }
        if self.model.trim().is_empty() {
            return Err(ChatError::InvalidConfig("model is empty".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ChatError::InvalidConfig(
                "temperature must be non-negative".into(),
            ));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(ChatError::InvalidConfig(
                "timeout_secs must be positive".into(),
            ));
        }
        self.retry.validate()
    }

    pub fn endpoint(&self) -> String {
        format!(
            "{}/v1/chat/completions",
            self.base_url.trim_end_matches('/')
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChatError {
    #[error("invalid endpoint config: {0}")]
    InvalidConfig(String),
    #[error("invalid message: {0}")]
    InvalidMessage(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("no ```{0} block in reply")]
    Extraction(String),
}

/// One HTTP attempt, as recorded in the client's log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub attempt: u32,
    pub request_body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Anything that turns a conversation into the assistant's next reply.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ChatError>;
}

/// The exact request body sent for `messages`.
pub fn request_body(config: &EndpointConfig, messages: &[ChatMessage]) -> String {
    let body = json!({
        "model": config.model,
        "messages": messages.iter().map(ChatMessage::wire).collect::<Vec<_>>(),
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    });
    serde_json::to_string(&body).expect("request serialization is infallible")
}

/// Pulls `choices[0].message.content` out of a response body.
pub fn parse_response(body: &str) -> Result<String, ChatError> {
    let v: Json =
        serde_json::from_str(body).map_err(|e| ChatError::MalformedResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Json::as_str)
        .map(str::to_string)
        .ok_or_else(|| ChatError::MalformedResponse("missing choices[0].message.content".into()))
}

pub struct ChatClient {
    config: EndpointConfig,
    agent: ureq::Agent,
    log: Mutex<Vec<Exchange>>,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(ChatError),
}

impl ChatClient {
    pub fn new(config: EndpointConfig) -> Result<Self, ChatError> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            agent,
            log: Mutex::new(Vec::new()),
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// Every attempt made so far, oldest first.
    pub fn log(&self) -> Vec<Exchange> {
        self.log.lock().expect("chat log lock poisoned").clone()
    }

    fn record(&self, exchange: Exchange) {
        self.log
            .lock()
            .expect("chat log lock poisoned")
            .push(exchange);
    }

    fn attempt(&self, n: u32, body: &str) -> Attempt {
        let mut req = self
            .agent
            .post(&self.config.endpoint())
            .header("content-type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("authorization", &format!("Bearer {key}"));
        }
        let mut exchange = Exchange {
            attempt: n,
            request_body: body.to_string(),
            status: None,
            response_body: None,
            error: None,
        };
        let outcome = match req.send(body) {
            Err(e) => {
                exchange.error = Some(e.to_string());
                Attempt::Retry(e.to_string())
            }
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                exchange.status = Some(status);
                match resp.body_mut().read_to_string() {
                    Err(e) => {
                        exchange.error = Some(e.to_string());
                        Attempt::Retry(e.to_string())
                    }
                    Ok(text) => {
                        exchange.response_body = Some(text.clone());
                        if (200..300).contains(&status) {
                            match parse_response(&text) {
                                Ok(content) => Attempt::Done(content),
                                Err(e) => Attempt::Fatal(e),
                            }
                        } else if status >= 500 || status == 429 {
                            Attempt::Retry(format!("HTTP {status}"))
                        } else {
                            Attempt::Fatal(ChatError::Status { status, body: text })
                        }
                    }
                }
            }
        };
        self.record(exchange);
        outcome
    }
}

impl ChatBackend for ChatClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ChatError> {
        if messages.is_empty() {
            return Err(ChatError::InvalidMessage("no messages".into()));
        }
        messages.iter().try_for_each(ChatMessage::validate)?;
        let body = request_body(&self.config, messages);
        let delays = self.config.retry.delays();
        let mut last = String::new();
        for n in 1..=self.config.retry.max_attempts {
            if n > 1 {
                std::thread::sleep(delays[n as usize - 2]);
            }
            match self.attempt(n, &body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(why) => last = why,
            }
        }
        Err(ChatError::Transport {
            attempts: self.config.retry.max_attempts,
            message: last,
        })
    }
}

/// Content of the first fenced block labelled `label`. With label `any`,
/// the first fenced block of any label, or the whole text when there is none.
pub fn extract_block(text: &str, label: &str) -> Result<String, ChatError> {
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        let Some(tag) = line.trim_start().strip_prefix("```") else {
            continue;
        };
        let tag = tag.trim();
        let mut body = Vec::new();
        for inner in lines.by_ref() {
            if inner.trim() == "```" {
                break;
            }
            body.push(inner);
        }
        if label == "any" || tag.eq_ignore_ascii_case(label) {
            let mut out = body.join("\n");
            out.push('\n');
            return Ok(out);
        }
    }
    if label == "any" {
        return Ok(text.to_string());
    }
    Err(ChatError::Extraction(label.to_string()))
}
