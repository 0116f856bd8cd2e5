use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::prompt::Message;

pub const API_KEY_ENV: &str = "RALM_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EndpointError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("HTTP {status} after {attempts} attempt(s): {body}")]
    Http { status: u16, attempts: u32, body: String },
    #[error("transport error: {0}")]
    Transport(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: f64,
    pub max_attempts: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff_ms: u64,
    pub max_in_flight: usize,
    /// Token-bucket refill rate; 0 disables rate limiting.
    pub requests_per_second: f64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000".into(),
            model: "default".into(),
            temperature: 0.0,
            max_tokens: 16,
            timeout_secs: 60.0,
            max_attempts: 3,
            backoff_ms: 500,
            max_in_flight: 4,
            requests_per_second: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    /// Attempts beyond the first.
    pub retries: u32,
}

/// Anything that turns a message list into one completion.
pub trait Completer: Sync {
    fn complete(&self, messages: &[Message]) -> Result<Completion, EndpointError>;
}

/// Adapts a closure; handy for offline runs and tests.
pub struct FnCompleter<F>(pub F);

impl<F> Completer for FnCompleter<F>
where
    F: Fn(&[Message]) -> Result<String, EndpointError> + Sync,
{
    fn complete(&self, messages: &[Message]) -> Result<Completion, EndpointError> {
        (self.0)(messages).map(|text| Completion { text, retries: 0 })
    }
}

pub struct ChatClient {
    config: EndpointConfig,
    api_key: String,
    agent: ureq::Agent,
}

enum Attempt {
    Done(String),
    Retry(EndpointError),
    Fail(EndpointError),
}

impl ChatClient {
    /// Reads the bearer token from [`API_KEY_ENV`]; a missing or empty key is
    /// an auth error before any network traffic.
    pub fn from_env(config: EndpointConfig) -> Result<Self, EndpointError> {
        Self::with_key(config, std::env::var(API_KEY_ENV).ok())
    }

    pub fn with_key(config: EndpointConfig, key: Option<String>) -> Result<Self, EndpointError> {
        match key {
            Some(k) if !k.trim().is_empty() => Ok(Self::new(config, k)),
            _ => Err(EndpointError::Auth(format!("{API_KEY_ENV} is not set"))),
        }
    }

    pub fn new(config: EndpointConfig, api_key: String) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            config,
            api_key,
            agent,
        }
    }

    pub fn url(&self) -> String {
        format!("{}/v1/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &serde_json::Value, attempts: u32) -> Attempt {
        let resp = self
            .agent
            .post(&self.url())
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        let mut resp = match resp {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(EndpointError::Timeout { attempts }),
            Err(ureq::Error::Io(e)) if e.kind() == std::io::ErrorKind::TimedOut => {
                return Attempt::Retry(EndpointError::Timeout { attempts })
            }
            Err(e) => return Attempt::Retry(EndpointError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(EndpointError::Timeout { attempts }),
            Err(e) => return Attempt::Retry(EndpointError::Transport(e.to_string())),
        };
        log::debug!("response {status}: {text}");
        match status {
            200..=299 => match extract_content(&text) {
                Ok(c) => Attempt::Done(c),
                Err(e) => Attempt::Fail(e),
            },
            401 | 403 => Attempt::Fail(EndpointError::Auth(format!("HTTP {status}: {text}"))),
            429 | 500..=599 => Attempt::Retry(EndpointError::Http {
                status,
                attempts,
                body: text,
            }),
            _ => Attempt::Fail(EndpointError::Http {
                status,
                attempts,
                body: text,
            }),
        }
    }
}

impl std::fmt::Debug for ChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChatClient")
            .field("config", &self.config)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

impl Completer for ChatClient {
    fn complete(&self, messages: &[Message]) -> Result<Completion, EndpointError> {
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        });
        log::debug!("POST {} {body}", self.url());
        let max = self.config.max_attempts.max(1);
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        for attempt in 1..=max {
            match self.attempt(&body, attempt) {
                Attempt::Done(text) => {
                    return Ok(Completion {
                        text,
                        retries: attempt - 1,
                    })
                }
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if attempt == max => return Err(e),
                Attempt::Retry(e) => {
                    log::warn!("attempt {attempt}/{max} failed ({e}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
        unreachable!("loop returns on the last attempt")
    }
}

fn extract_content(text: &str) -> Result<String, EndpointError> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| EndpointError::Malformed(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| EndpointError::Malformed("missing choices[0].message.content".into()))
}

/// Blocking token bucket holding at most one second's worth of tokens.
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    tokens: f64,
    last: Instant,
}

impl TokenBucket {
    pub fn new(rate: f64) -> Self {
        let capacity = rate.max(1.0);
        Self {
            rate,
            capacity,
            tokens: capacity,
            last: Instant::now(),
        }
    }

    /// Time to wait before a token is available; takes it when zero.
    pub fn try_take(&mut self) -> Duration {
        if self.rate <= 0.0 {
            return Duration::ZERO;
        }
        let now = Instant::now();
        self.tokens = (self.tokens + now.duration_since(self.last).as_secs_f64() * self.rate).min(self.capacity);
        self.last = now;
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            Duration::ZERO
        } else {
            Duration::from_secs_f64((1.0 - self.tokens) / self.rate)
        }
    }
}
