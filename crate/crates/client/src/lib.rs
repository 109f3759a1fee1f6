//! Plain text-completion client: `{prompt, temperature, max_new_tokens, stop}`
//! in, completion text out. Transient failures are retried with exponential
//! backoff; batches run with a bounded number of requests in flight.

use std::time::Duration;

use futures::stream::{self, StreamExt};
use reqwest::header::{HeaderMap, RETRY_AFTER};
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use toolchat_core::codec::tokens;

pub const TOKEN_ENV: &str = "TOOLCHAT_API_TOKEN";

/// Longest wait honored from a `Retry-After` header.
const MAX_RETRY_AFTER: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub stop: Vec<String>,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self { temperature: 0.0, max_new_tokens: 512, stop: vec![tokens::EOT.to_string()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Full URL of the completion route; posted to as given.
    pub base_url: String,
    #[serde(skip)]
    pub auth_token: Option<String>,
    #[serde(with = "secs")]
    pub timeout: Duration,
    pub max_retries: u32,
    pub max_in_flight: usize,
    #[serde(with = "secs")]
    pub backoff_base: Duration,
    #[serde(with = "secs")]
    pub backoff_max: Duration,
    pub sampling: SamplingParams,
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            auth_token: None,
            timeout: Duration::from_secs(60),
            max_retries: 3,
            max_in_flight: 4,
            backoff_base: Duration::from_millis(250),
            backoff_max: Duration::from_secs(8),
            sampling: SamplingParams::default(),
        }
    }

    /// Like [`EndpointConfig::new`], with the bearer token taken from `TOOLCHAT_API_TOKEN`.
    pub fn from_env(base_url: impl Into<String>) -> Self {
        Self { auth_token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()), ..Self::new(base_url) }
    }

    fn backoff(&self, retry: u32) -> Duration {
        self.backoff_base.saturating_mul(1u32 << retry.min(16)).min(self.backoff_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: Option<u64>,
    #[serde(default)]
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("invalid endpoint config: {0}")]
    InvalidConfig(String),
    #[error("transport failure after {attempts} attempt(s): {detail}")]
    Transport { detail: String, attempts: u32 },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { retry_after: Option<Duration>, attempts: u32 },
    #[error("request rejected with {status}: {body}")]
    BadRequest { status: u16, body: String },
    #[error("unreadable completion body: {0}")]
    InvalidResponse(String),
}

#[derive(Serialize)]
struct RequestBody<'a> {
    prompt: &'a str,
    temperature: f64,
    max_new_tokens: u32,
    stop: &'a [String],
}

/// Accepts `{"text": ...}` or `{"choices": [{"text": ...}]}`, with optional `usage`.
fn extract_completion(body: &str) -> Result<Completion, ClientError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ClientError::InvalidResponse(e.to_string()))?;
    let text = v
        .get("text")
        .or_else(|| v.pointer("/choices/0/text"))
        .and_then(Value::as_str)
        .ok_or_else(|| ClientError::InvalidResponse("no `text` or `choices[0].text` field".into()))?;
    let usage = v.get("usage").and_then(|u| serde_json::from_value(u.clone()).ok());
    Ok(Completion { text: text.to_string(), usage })
}

fn retry_after(headers: &HeaderMap) -> Option<Duration> {
    let secs: f64 = headers.get(RETRY_AFTER)?.to_str().ok()?.trim().parse().ok()?;
    Duration::try_from_secs_f64(secs).ok().map(|d| d.min(MAX_RETRY_AFTER))
}

enum Attempt {
    Done(Completion),
    Fatal(ClientError),
    Retry { wait: Option<Duration>, last: ClientError },
}

/// Shareable across tasks and threads; cloning is cheap.
#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    cfg: EndpointConfig,
}

impl Client {
    pub fn new(cfg: EndpointConfig) -> Result<Self, ClientError> {
        if cfg.max_in_flight == 0 {
            return Err(ClientError::InvalidConfig("max_in_flight must be at least 1".into()));
        }
        reqwest::Url::parse(&cfg.base_url).map_err(|e| ClientError::InvalidConfig(format!("base_url: {e}")))?;
        let http = reqwest::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| ClientError::InvalidConfig(e.to_string()))?;
        Ok(Self { http, cfg })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    async fn attempt(&self, prompt: &str, attempts: u32) -> Attempt {
        let body = RequestBody {
            prompt,
            temperature: self.cfg.sampling.temperature,
            max_new_tokens: self.cfg.sampling.max_new_tokens,
            stop: &self.cfg.sampling.stop,
        };
        let mut req = self.http.post(&self.cfg.base_url).json(&body);
        if let Some(token) = &self.cfg.auth_token {
            req = req.bearer_auth(token);
        }
        let resp = match req.send().await {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry { wait: None, last: ClientError::Transport { detail: e.to_string(), attempts } }
            }
        };
        let status = resp.status();
        let wait = retry_after(resp.headers());
        let text = match resp.text().await {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Retry { wait: None, last: ClientError::Transport { detail: e.to_string(), attempts } }
            }
        };
        if status.is_success() {
            return match extract_completion(&text) {
                Ok(c) => Attempt::Done(c),
                Err(e) => Attempt::Fatal(e),
            };
        }
        if status == StatusCode::TOO_MANY_REQUESTS {
            return Attempt::Retry { wait, last: ClientError::RateLimited { retry_after: wait, attempts } };
        }
        if status.is_server_error() {
            let detail = format!("{status}: {}", text.chars().take(200).collect::<String>());
            return Attempt::Retry { wait: None, last: ClientError::Transport { detail, attempts } };
        }
        Attempt::Fatal(ClientError::BadRequest { status: status.as_u16(), body: text })
    }

    /// Sends one prompt. At most `max_retries + 1` requests are made.
    pub async fn complete(&self, prompt: &str) -> Result<Completion, ClientError> {
        if prompt.is_empty() {
            return Err(ClientError::EmptyPrompt);
        }
        let mut retries = 0;
        loop {
            match self.attempt(prompt, retries + 1).await {
                Attempt::Done(c) => return Ok(c),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry { last, .. } if retries >= self.cfg.max_retries => return Err(last),
                Attempt::Retry { wait, .. } => {
                    tokio::time::sleep(wait.unwrap_or_else(|| self.cfg.backoff(retries))).await;
                    retries += 1;
                }
            }
        }
    }

    /// Completes every prompt with at most `max_in_flight` requests open.
    /// Result `i` belongs to prompt `i`; failures stay in-band.
    pub async fn run_batch<S: AsRef<str>>(&self, prompts: &[S]) -> Vec<Result<Completion, ClientError>> {
        stream::iter(prompts).map(|p| self.complete(p.as_ref())).buffered(self.cfg.max_in_flight).collect().await
    }
}
