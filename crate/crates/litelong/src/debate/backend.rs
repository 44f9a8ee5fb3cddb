//! Chat-completion backends for the debate stage.
//!
//! Two implementations sit behind [`ChatBackend`]: an OpenAI-style HTTP
//! client ([`HttpChatBackend`]) and the deterministic mock
//! ([`crate::mock::MockBackend`]). Every call goes through an in-flight
//! limiter so the configured `max_in_flight` bound holds across concurrent
//! subcategory rounds; the limiter doubles as the instrumented counter the
//! tests assert against.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mock::{MockBackend, MockProfile};

/// Environment variable holding the bearer token for `http_chat` backends.
pub const API_KEY_ENV: &str = "LITELONG_API_KEY";

const BACKOFF_BASE_MS: u64 = 500;
const BACKOFF_FACTOR: u32 = 2;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("HTTP {status} after {attempts} attempt(s): {body}")]
    Http {
        status: u16,
        attempts: u32,
        body: String,
    },
    #[error("response envelope missing choices[0].message.content")]
    MalformedEnvelope,
    #[error("mock backend: {0}")]
    Mock(String),
    #[error("backend config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Wire request body for `POST {endpoint_url}/chat/completions`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub seed: u64,
}

pub trait ChatBackend: Send + Sync {
    /// Returns the assistant message content for one request.
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    Mock,
}

/// Connection settings for one model role.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint_url: String,
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Inline mock profile, required when `kind` is `mock`.
    #[serde(default)]
    pub mock: Option<MockProfile>,
}

fn default_temperature() -> f64 {
    0.7
}
fn default_max_in_flight() -> usize {
    8
}
fn default_timeout_ms() -> u64 {
    60_000
}
fn default_max_retries() -> u32 {
    3
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_in_flight < 1 {
            return Err(BackendError::Config("max_in_flight must be >= 1".into()));
        }
        if self.timeout_ms == 0 {
            return Err(BackendError::Config("timeout_ms must be > 0".into()));
        }
        match self.kind {
            BackendKind::HttpChat if self.endpoint_url.trim().is_empty() => Err(
                BackendError::Config("http_chat backend needs endpoint_url".into()),
            ),
            BackendKind::Mock if self.mock.is_none() => Err(BackendError::Config(
                "mock backend needs an inline mock profile".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Builds the runtime backend handle (with its in-flight limiter).
    pub fn build(&self) -> Result<Backend, BackendError> {
        self.validate()?;
        let inner: Arc<dyn ChatBackend> = match self.kind {
            BackendKind::Mock => Arc::new(MockBackend::new(self.mock.clone().unwrap())),
            BackendKind::HttpChat => Arc::new(HttpChatBackend::new(
                &self.endpoint_url,
                Duration::from_millis(self.timeout_ms),
                self.max_retries,
            )?),
        };
        Ok(Backend::new(inner, self.clone()))
    }
}

/// Counting semaphore that records its high-water mark.
struct InFlightLimiter {
    max: usize,
    current: Mutex<usize>,
    released: Condvar,
    peak: AtomicUsize,
    calls: AtomicU64,
}

impl InFlightLimiter {
    fn new(max: usize) -> Self {
        Self {
            max,
            current: Mutex::new(0),
            released: Condvar::new(),
            peak: AtomicUsize::new(0),
            calls: AtomicU64::new(0),
        }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut cur = self.current.lock().unwrap();
        while *cur >= self.max {
            cur = self.released.wait(cur).unwrap();
        }
        *cur += 1;
        self.peak.fetch_max(*cur, Ordering::SeqCst);
        self.calls.fetch_add(1, Ordering::SeqCst);
        LimiterGuard { limiter: self }
    }
}

struct LimiterGuard<'a> {
    limiter: &'a InFlightLimiter,
}

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        let mut cur = self.limiter.current.lock().unwrap();
        *cur -= 1;
        self.limiter.released.notify_one();
    }
}

/// A configured backend plus its concurrency bound. Cheap to share by
/// reference across round workers.
pub struct Backend {
    inner: Arc<dyn ChatBackend>,
    limiter: InFlightLimiter,
    config: BackendConfig,
}

impl Backend {
    pub fn new(inner: Arc<dyn ChatBackend>, config: BackendConfig) -> Self {
        let limiter = InFlightLimiter::new(config.max_in_flight.max(1));
        Self {
            inner,
            limiter,
            config,
        }
    }

    pub fn request(&self, system: &str, user: &str) -> ChatRequest {
        ChatRequest {
            model: self.config.model_name.clone(),
            messages: vec![
                ChatMessage {
                    role: "system".to_string(),
                    content: system.to_string(),
                },
                ChatMessage {
                    role: "user".to_string(),
                    content: user.to_string(),
                },
            ],
            temperature: self.config.temperature,
            seed: self.config.seed,
        }
    }

    pub fn execute(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let _guard = self.limiter.acquire();
        self.inner.complete(request)
    }

    /// Highest number of simultaneously outstanding requests observed.
    pub fn peak_in_flight(&self) -> usize {
        self.limiter.peak.load(Ordering::SeqCst)
    }

    pub fn total_calls(&self) -> u64 {
        self.limiter.calls.load(Ordering::SeqCst)
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }
}

/// Blocking OpenAI-style chat client with exponential-backoff retries
/// (base 500 ms, factor 2) on non-2xx responses and transport failures.
pub struct HttpChatBackend {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
    max_retries: u32,
    transport_retries: AtomicU64,
}

impl HttpChatBackend {
    pub fn new(endpoint_url: &str, timeout: Duration, max_retries: u32) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self {
            client,
            url: format!("{}/chat/completions", endpoint_url.trim_end_matches('/')),
            api_key: std::env::var(API_KEY_ENV).ok(),
            max_retries,
            transport_retries: AtomicU64::new(0),
        })
    }

    /// Retries performed so far (for tests against a scripted server).
    pub fn transport_retries(&self) -> u64 {
        self.transport_retries.load(Ordering::SeqCst)
    }
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let mut attempt: u32 = 0;
        loop {
            attempt += 1;
            let mut builder = self.client.post(&self.url).json(request);
            if let Some(key) = &self.api_key {
                builder = builder.bearer_auth(key);
            }
            let outcome: Result<String, BackendError> = match builder.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        match resp.json::<serde_json::Value>() {
                            Ok(body) => {
                                match body["choices"][0]["message"]["content"].as_str() {
                                    Some(content) => return Ok(content.to_string()),
                                    None => Err(BackendError::MalformedEnvelope),
                                }
                            }
                            Err(e) => Err(BackendError::Transport {
                                attempts: attempt,
                                detail: format!("body decode: {e}"),
                            }),
                        }
                    } else {
                        Err(BackendError::Http {
                            status: status.as_u16(),
                            attempts: attempt,
                            body: resp.text().unwrap_or_default(),
                        })
                    }
                }
                Err(e) => Err(BackendError::Transport {
                    attempts: attempt,
                    detail: e.to_string(),
                }),
            };
            let err = outcome.expect_err("loop continues only on error");
            if attempt > self.max_retries {
                return Err(err);
            }
            self.transport_retries.fetch_add(1, Ordering::SeqCst);
            let backoff = BACKOFF_BASE_MS * u64::from(BACKOFF_FACTOR.pow(attempt - 1));
            std::thread::sleep(Duration::from_millis(backoff));
        }
    }
}
