//! Chat-completion gateway: transports, retry with seeded jitter, and
//! rate limiting.
//!
//! One logical `complete` call makes up to `1 + max_retries` attempts;
//! an attempt that exceeds the per-attempt timeout counts as a failure.
//! Between attempts the gateway waits a random period drawn from a
//! seeded interval, so the whole retry schedule is reproducible.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use recallcheck_core::prompt::{ChatRequest, RetryPolicy};

use crate::config::EndpointSection;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("attempt exceeded the per-attempt timeout")]
    Timeout,
    #[error("http error: {0}")]
    Http(String),
    #[error("malformed response body: {0}")]
    Malformed(String),
}

/// One attempt's outcome, kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    /// 1-based attempt number.
    pub attempt: u32,
    pub outcome: String,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("all {attempts} attempts failed; last error: {last}")]
    Exhausted {
        attempts: u32,
        last: TransportError,
        diagnostics: Vec<AttemptRecord>,
    },
    #[error("invalid retry policy")]
    InvalidPolicy,
    #[error("credential variable `{0}` is not set")]
    MissingCredential(String),
}

/// A blocking chat transport. Implementations must respect `timeout` as
/// the per-attempt budget.
pub trait Transport: Send + Sync {
    fn send(&self, request: &ChatRequest, timeout: Duration) -> Result<String, TransportError>;
}

/// Scripted transport for tests: a queue of (simulated delay, outcome)
/// entries. A simulated delay at or above the timeout turns the entry
/// into a timeout without actually sleeping.
pub struct ScriptedTransport {
    script: Mutex<VecDeque<(Duration, Result<String, TransportError>)>>,
    calls: Mutex<Vec<ChatRequest>>,
}

impl ScriptedTransport {
    pub fn new(script: Vec<(Duration, Result<String, TransportError>)>) -> Self {
        Self { script: Mutex::new(script.into()), calls: Mutex::new(Vec::new()) }
    }

    /// Convenience: instant replies, in order; the last entry repeats.
    pub fn replies(texts: &[&str]) -> Self {
        Self::new(
            texts
                .iter()
                .map(|t| (Duration::ZERO, Ok(t.to_string())))
                .collect(),
        )
    }

    pub fn calls(&self) -> Vec<ChatRequest> {
        self.calls.lock().expect("calls lock").clone()
    }
}

impl Transport for ScriptedTransport {
    fn send(&self, request: &ChatRequest, timeout: Duration) -> Result<String, TransportError> {
        self.calls.lock().expect("calls lock").push(request.clone());
        let mut script = self.script.lock().expect("script lock");
        let (delay, outcome) = match script.len() {
            0 => return Err(TransportError::Http("script exhausted".into())),
            1 => script.front().cloned().expect("non-empty script"),
            _ => script.pop_front().expect("non-empty script"),
        };
        if delay >= timeout {
            return Err(TransportError::Timeout);
        }
        outcome
    }
}

/// HTTP transport speaking the chat-completions interchange shape.
pub struct HttpTransport {
    endpoint: EndpointSection,
    api_key: Option<String>,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireChoiceMessage,
}

#[derive(Deserialize)]
struct WireChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

impl HttpTransport {
    /// Reads the API key from the environment variable named in the
    /// endpoint config; the key never lives in the config file.
    pub fn new(endpoint: EndpointSection) -> Result<Self, GatewayError> {
        let api_key = match endpoint.api_key_env.as_str() {
            "" => None,
            var => Some(
                std::env::var(var)
                    .map_err(|_| GatewayError::MissingCredential(var.to_string()))?,
            ),
        };
        Ok(Self { endpoint, api_key })
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &ChatRequest, timeout: Duration) -> Result<String, TransportError> {
        let role = |r: &recallcheck_core::prompt::ChatRole| match r {
            recallcheck_core::prompt::ChatRole::System => "system",
            recallcheck_core::prompt::ChatRole::User => "user",
            recallcheck_core::prompt::ChatRole::Assistant => "assistant",
        };
        let body = WireRequest {
            model: &self.endpoint.model,
            messages: request
                .messages
                .iter()
                .map(|m| WireMessage { role: role(&m.role), content: &m.content })
                .collect(),
            temperature: request.temperature,
            max_tokens: request.max_output_tokens,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::Http(e.to_string()))?;
        let url = format!("{}/chat/completions", self.endpoint.base_url.trim_end_matches('/'));
        let mut req = client.post(url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Http(e.to_string())
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(TransportError::Http(format!("status {status}")));
        }
        let parsed: WireResponse = resp
            .json()
            .map_err(|e| TransportError::Malformed(e.to_string()))?;
        parsed
            .choices
            .first()
            .map(|c| c.message.content.clone())
            .ok_or_else(|| TransportError::Malformed("no choices in response".into()))
    }
}

/// Minimum spacing between dispatches, derived from requests/minute.
struct RateLimiter {
    min_interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn new(requests_per_minute: u32) -> Self {
        let min_interval = if requests_per_minute == 0 {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(60.0 / f64::from(requests_per_minute))
        };
        Self { min_interval, last: Mutex::new(None) }
    }

    fn acquire(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        let mut last = self.last.lock().expect("rate lock");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                std::thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

/// Retry/rate-limit wrapper around a transport.
pub struct Gateway<T: Transport> {
    transport: T,
    policy: RetryPolicy,
    rng: Mutex<ChaCha8Rng>,
    limiter: RateLimiter,
    /// When false (tests), inter-attempt waits are computed and recorded
    /// but not slept.
    sleep_for_real: bool,
}

impl<T: Transport> Gateway<T> {
    pub fn new(transport: T, policy: RetryPolicy, seed: u64, requests_per_minute: u32) -> Result<Self, GatewayError> {
        policy.validate().map_err(|_| GatewayError::InvalidPolicy)?;
        Ok(Self {
            transport,
            policy,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            limiter: RateLimiter::new(requests_per_minute),
            sleep_for_real: true,
        })
    }

    pub fn without_real_waits(mut self) -> Self {
        self.sleep_for_real = false;
        self
    }

    fn retry_wait(&self) -> Duration {
        let mut rng = self.rng.lock().expect("rng lock");
        let min = self.policy.wait_min.as_millis() as u64;
        let max = self.policy.wait_max.as_millis() as u64;
        Duration::from_millis(rng.gen_range(min..=max))
    }

    /// Runs one logical completion call under the retry policy. Returns
    /// the first successful reply with the per-attempt diagnostics.
    pub fn complete(
        &self,
        request: &ChatRequest,
    ) -> Result<(String, Vec<AttemptRecord>), GatewayError> {
        let max_attempts = self.policy.max_retries + 1;
        let mut diagnostics = Vec::new();
        let mut last = TransportError::Http("no attempt made".into());
        for attempt in 1..=max_attempts {
            self.limiter.acquire();
            match self.transport.send(request, self.policy.per_attempt_timeout) {
                Ok(text) => {
                    diagnostics.push(AttemptRecord { attempt, outcome: "ok".into() });
                    return Ok((text, diagnostics));
                }
                Err(e) => {
                    diagnostics.push(AttemptRecord { attempt, outcome: e.to_string() });
                    last = e;
                }
            }
            if attempt < max_attempts {
                let wait = self.retry_wait();
                if self.sleep_for_real {
                    std::thread::sleep(wait);
                }
            }
        }
        Err(GatewayError::Exhausted { attempts: max_attempts, last, diagnostics })
    }
}
