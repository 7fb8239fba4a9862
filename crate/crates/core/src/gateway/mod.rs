//! Chat-completion backends behind a shared rate limiter with retry.

mod clock;
#[cfg(feature = "http")]
mod http;
mod limiter;
mod mock;
mod retry;

use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segmentation::TokenCounter;

pub use clock::{Clock, SimulatedClock, SystemClock};
#[cfg(feature = "http")]
pub use http::{HttpBackend, API_KEY_ENV, DEFAULT_BASE_URL};
pub use limiter::{max_window_load, RateLimitError, RateLimiter, TokenLedger, DEFAULT_TPM, WINDOW};
pub use mock::{MockBackend, MockFallback, MockScript};
pub use retry::RetryPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub model_name: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_response_tokens: u32,
}

impl CompletionRequest {
    pub fn new(
        model_name: impl Into<String>,
        messages: Vec<Message>,
        max_response_tokens: u32,
    ) -> Result<Self, GatewayError> {
        Self::with_temperature(model_name, messages, 0.0, max_response_tokens)
    }

    pub fn with_temperature(
        model_name: impl Into<String>,
        messages: Vec<Message>,
        temperature: f64,
        max_response_tokens: u32,
    ) -> Result<Self, GatewayError> {
        if messages.is_empty() {
            return Err(GatewayError::InvalidRequest("at least one message is required".into()));
        }
        if temperature.is_nan() || temperature < 0.0 {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {temperature} is negative"
            )));
        }
        Ok(Self {
            model_name: model_name.into(),
            messages,
            temperature,
            max_response_tokens,
        })
    }

    /// Tokens to reserve: counted message text plus the response allowance.
    pub fn estimated_tokens(&self, counter: &TokenCounter) -> u64 {
        let prompt: usize = self.messages.iter().map(|m| counter.count(&m.content)).sum();
        prompt as u64 + u64::from(self.max_response_tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub content: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Where a request sits in a batch. Scripted backends key on it; the HTTP
/// backend ignores it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RequestContext {
    pub team_id: String,
    pub chunk_index: usize,
    pub trial_index: usize,
    /// The summary carried into this request, serialized; lets a scripted
    /// backend answer "no change".
    pub current_summary: Option<String>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("configuration: {0}")]
    Config(String),
}

impl BackendError {
    /// Transport failures, 429 and 5xx are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Status { code, .. } => *code == 429 || (500..600).contains(code),
            BackendError::Protocol(_) | BackendError::Config(_) => false,
        }
    }
}

pub trait ChatBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &CompletionRequest, ctx: &RequestContext) -> Result<CompletionResponse, BackendError>;
}

#[derive(Debug, Error, PartialEq)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    RateLimit(#[from] RateLimitError),
    #[error("non-retryable backend failure: {0}")]
    NonRetryable(BackendError),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: BackendError },
    #[error("configuration: {0}")]
    Config(String),
}

impl GatewayError {
    pub fn status_code(&self) -> Option<u16> {
        match self {
            GatewayError::NonRetryable(BackendError::Status { code, .. })
            | GatewayError::RetriesExhausted {
                last: BackendError::Status { code, .. },
                ..
            } => Some(*code),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completed {
    pub response: CompletionResponse,
    pub attempts: u32,
}

/// Backend + shared limiter + retry policy. Cheap to share across team
/// pipelines; the limiter is the only mutable shared state.
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    limiter: Arc<RateLimiter>,
    counter: Arc<TokenCounter>,
    retry: RetryPolicy,
    jitter: Mutex<ChaCha8Rng>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, limiter: Arc<RateLimiter>, counter: Arc<TokenCounter>) -> Self {
        Self {
            backend,
            limiter,
            counter,
            retry: RetryPolicy::default(),
            jitter: Mutex::new(ChaCha8Rng::seed_from_u64(0)),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_jitter_seed(self, seed: u64) -> Self {
        *self.jitter.lock().expect("jitter lock") = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn limiter(&self) -> &Arc<RateLimiter> {
        &self.limiter
    }

    /// One rate-limit grant for the estimated tokens, then up to
    /// `max_attempts` calls with exponential backoff and full jitter.
    pub fn complete(&self, request: &CompletionRequest, ctx: &RequestContext) -> Result<Completed, GatewayError> {
        self.limiter.acquire(request.estimated_tokens(&self.counter))?;
        let clock = self.limiter.clock();
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.backend.complete(request, ctx) {
                Ok(response) => {
                    return Ok(Completed {
                        response,
                        attempts: attempt,
                    })
                }
                Err(e) if !e.is_retryable() => return Err(GatewayError::NonRetryable(e)),
                Err(e) if attempt >= self.retry.max_attempts => {
                    return Err(GatewayError::RetriesExhausted {
                        attempts: attempt,
                        last: e,
                    })
                }
                Err(e) => {
                    let delay = {
                        let mut rng = self.jitter.lock().expect("jitter lock");
                        self.retry.jittered_delay(attempt, &mut *rng)
                    };
                    log::warn!(
                        "{} attempt {attempt} for team {} chunk {} failed ({e}); retrying in {:.1}s",
                        self.backend.name(),
                        ctx.team_id,
                        ctx.chunk_index,
                        delay.as_secs_f64()
                    );
                    clock.sleep_until(clock.now() + delay);
                }
            }
        }
    }
}

/// Convenience for offline runs: a limiter on a simulated clock so waits cost
/// no wall time.
pub fn simulated_limiter(tpm: u64) -> Arc<RateLimiter> {
    Arc::new(RateLimiter::new(tpm, Arc::new(SimulatedClock::new())))
}
