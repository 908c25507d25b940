//! Cached, retrying access to the three remote capabilities the pipeline and
//! the metrics need: chat completion, token-level embeddings and POS tagging.
//!
//! A [`Gateway`] wraps a [`Transport`] (HTTP or the scripted mock) with an
//! on-disk response cache, exponential backoff on transient failures and a
//! bound on in-flight requests.

mod cache;
mod http;
mod mock;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use cache::ResponseCache;
pub use http::{HttpEndpoints, HttpTransport};
pub use mock::{rule_tag, ChatRule, EmbeddingMock, MockReply, MockScript, MockTransport, PosMock, ReplySpec};

/// Model used for reasoning extraction and question generation.
pub const DEFAULT_EXTRACTOR_MODEL: &str = "gpt-4.1-mini";
pub const DEFAULT_EXTRACTOR_TEMPERATURE: f64 = 0.3;
/// Model used for both validation stages.
pub const DEFAULT_VALIDATOR_MODEL: &str = "gpt-4o-mini";
pub const DEFAULT_VALIDATOR_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_MAX_TOKENS: u32 = 2048;
pub const DEFAULT_MAX_RETRIES: u32 = 4;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_tag: String,
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Distinguishes deliberate re-asks of an identical prompt so the cache
    /// does not replay the earlier answer. Sent to the provider as `seed`.
    #[serde(default)]
    pub nonce: u32,
    /// Local label (pipeline stage); never sent over the wire.
    #[serde(default)]
    pub purpose: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatReply {
    pub text: String,
    pub finish_reason: FinishReason,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub from_cache: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEmbeddings {
    pub tokens: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

impl TokenEmbeddings {
    pub fn validate(&self) -> Result<(), String> {
        if self.tokens.len() != self.vectors.len() {
            return Err(format!(
                "{} tokens but {} vectors",
                self.tokens.len(),
                self.vectors.len()
            ));
        }
        let dim = self.vectors.first().map_or(1, Vec::len);
        if dim == 0 || self.vectors.iter().any(|v| v.len() != dim) {
            return Err("embedding vectors must share one positive dimension".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosTagging {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

/// Failure classes reported by a transport. Only some are worth retrying.
#[derive(Debug, Clone, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("rate limited (429): {0}")]
    RateLimited(String),
    #[error("server error {status}: {body}")]
    Server { status: u16, body: String },
    #[error("client error {status}: {body}")]
    Client { status: u16, body: String },
    #[error("connection failed: {0}")]
    Network(String),
    #[error("undecodable response: {0}")]
    Decode(String),
    #[error("capability unavailable: {0}")]
    Capability(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            Self::Timeout(_) | Self::RateLimited(_) | Self::Server { .. } | Self::Network(_)
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("gave up after {attempts} attempt(s): {last}")]
    Exhausted { attempts: u32, last: TransportError },
    #[error("provider rejected request ({status}): {excerpt}")]
    Provider { status: u16, excerpt: String },
    #[error("{0}; use the whole-text fallback")]
    Capability(String),
    #[error("invalid provider response: {0}")]
    InvalidResponse(String),
    #[error("cache: {0}")]
    Cache(#[from] std::io::Error),
}

/// The wire layer. Implementations perform exactly one attempt per call.
pub trait Transport: Send + Sync {
    /// Identity folded into cache keys (endpoint, or "mock").
    fn provider_id(&self) -> String;
    fn chat(&self, req: &ChatRequest) -> Result<ChatReply, TransportError>;
    fn embed_tokens(&self, model: &str, text: &str) -> Result<TokenEmbeddings, TransportError>;
    fn embed_text(&self, model: &str, text: &str) -> Result<Vec<f64>, TransportError>;
    fn pos_tag(&self, model: &str, text: &str) -> Result<PosTagging, TransportError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
    #[serde(with = "millis")]
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: DEFAULT_MAX_RETRIES,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn delay_for(&self, retry: u32) -> Duration {
        let factor = 2u32.saturating_pow(retry);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone)]
pub struct GatewayOptions {
    pub embed_model: String,
    pub pos_model: String,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for GatewayOptions {
    fn default() -> Self {
        Self {
            embed_model: "token-embedder".into(),
            pos_model: "pos-tagger".into(),
            retry: RetryPolicy::default(),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            cache_dir: None,
        }
    }
}

struct Limiter {
    in_flight: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(limit: usize) -> Self {
        Self {
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            limit: limit.max(1),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GatewayStats {
    pub network_attempts: usize,
    pub cache_hits: usize,
}

pub struct Gateway {
    transport: Arc<dyn Transport>,
    cache: Option<ResponseCache>,
    opts: GatewayOptions,
    limiter: Limiter,
    attempts: AtomicUsize,
    hits: AtomicUsize,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("provider", &self.transport.provider_id())
            .field("opts", &self.opts)
            .finish()
    }
}

#[derive(Serialize)]
struct CacheKey<'a, T: Serialize> {
    kind: &'static str,
    provider: String,
    request: &'a T,
}

impl Gateway {
    pub fn new(transport: Arc<dyn Transport>, opts: GatewayOptions) -> Result<Self, GatewayError> {
        let cache = match &opts.cache_dir {
            Some(dir) => Some(ResponseCache::open(dir)?),
            None => None,
        };
        Ok(Self {
            transport,
            cache,
            limiter: Limiter::new(opts.max_in_flight),
            opts,
            attempts: AtomicUsize::new(0),
            hits: AtomicUsize::new(0),
        })
    }

    pub fn options(&self) -> &GatewayOptions {
        &self.opts
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            network_attempts: self.attempts.load(Ordering::SeqCst),
            cache_hits: self.hits.load(Ordering::SeqCst),
        }
    }

    fn key<T: Serialize>(&self, kind: &'static str, request: &T) -> String {
        let key = CacheKey {
            kind,
            provider: self.transport.provider_id(),
            request,
        };
        let bytes = serde_json::to_vec(&key).expect("cache keys serialize");
        cache::hash_key(&bytes)
    }

    /// Runs `call` with backoff. Returns the value and whether it came from cache.
    fn cached<Req, Resp, F>(&self, kind: &'static str, request: &Req, call: F) -> Result<(Resp, bool), GatewayError>
    where
        Req: Serialize,
        Resp: Serialize + serde::de::DeserializeOwned,
        F: Fn() -> Result<Resp, TransportError>,
    {
        let Some(cache) = &self.cache else {
            return Ok((self.with_retries(call)?, false));
        };
        let key = self.key(kind, request);
        if let Some(bytes) = cache.get(&key)? {
            if let Ok(value) = serde_json::from_slice(&bytes) {
                self.hits.fetch_add(1, Ordering::SeqCst);
                return Ok((value, true));
            }
            log::warn!("ignoring unreadable cache entry {key}");
        }
        let value = self.with_retries(call)?;
        let bytes = serde_json::to_vec(&value).expect("responses serialize");
        cache.put(&key, &bytes)?;
        Ok((value, false))
    }

    fn with_retries<T, F>(&self, call: F) -> Result<T, GatewayError>
    where
        F: Fn() -> Result<T, TransportError>,
    {
        let policy = self.opts.retry;
        let mut attempt = 0u32;
        loop {
            self.attempts.fetch_add(1, Ordering::SeqCst);
            let result = {
                let _permit = self.limiter.acquire();
                call()
            };
            match result {
                Ok(v) => return Ok(v),
                Err(TransportError::Client { status, body }) => {
                    return Err(GatewayError::Provider {
                        status,
                        excerpt: excerpt(&body),
                    })
                }
                Err(TransportError::Capability(msg)) => return Err(GatewayError::Capability(msg)),
                Err(TransportError::Decode(msg)) => return Err(GatewayError::InvalidResponse(msg)),
                Err(e) if e.is_retryable() && attempt < policy.max_retries => {
                    let delay = policy.delay_for(attempt);
                    log::debug!("transient failure ({e}); retry {} in {delay:?}", attempt + 1);
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => {
                    return Err(GatewayError::Exhausted {
                        attempts: attempt + 1,
                        last: e,
                    })
                }
            }
        }
    }

    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        if !(0.0..=2.0).contains(&req.temperature) {
            return Err(GatewayError::Precondition(format!(
                "temperature {} outside [0, 2]",
                req.temperature
            )));
        }
        if req.max_tokens == 0 {
            return Err(GatewayError::Precondition("max_tokens must be positive".into()));
        }
        let (reply, from_cache): (ChatReply, bool) = self.cached("chat", req, || self.transport.chat(req))?;
        Ok(ChatResponse {
            text: reply.text,
            finish_reason: reply.finish_reason,
            from_cache,
        })
    }

    pub fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::Precondition("text must be non-empty".into()));
        }
        let model = &self.opts.embed_model;
        let (emb, _): (TokenEmbeddings, bool) = self.cached("embed_tokens", &(model, text), || {
            self.transport.embed_tokens(model, text)
        })?;
        emb.validate().map_err(GatewayError::InvalidResponse)?;
        Ok(emb)
    }

    pub fn embed_text(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::Precondition("text must be non-empty".into()));
        }
        let model = &self.opts.embed_model;
        let (v, _): (Vec<f64>, bool) =
            self.cached("embed_text", &(model, text), || self.transport.embed_text(model, text))?;
        if v.is_empty() {
            return Err(GatewayError::InvalidResponse("empty embedding".into()));
        }
        Ok(v)
    }

    pub fn pos_tag(&self, text: &str) -> Result<PosTagging, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::Precondition("text must be non-empty".into()));
        }
        let model = &self.opts.pos_model;
        let (tagging, _): (PosTagging, bool) =
            self.cached("pos", &(model, text), || self.transport.pos_tag(model, text))?;
        if tagging.tokens.len() != tagging.tags.len() {
            return Err(GatewayError::InvalidResponse(format!(
                "{} tokens but {} tags",
                tagging.tokens.len(),
                tagging.tags.len()
            )));
        }
        Ok(tagging)
    }
}

fn excerpt(body: &str) -> String {
    const MAX: usize = 200;
    match body.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}...", &body[..i]),
        None => body.to_string(),
    }
}
