//! Scripted offline provider.
//!
//! A script is a JSON document:
//!
//! ```json
//! {
//!   "chat": [
//!     {"purpose": "validate_reasoning", "user_contains": "...", "responses": ["כן"]},
//!     {"purpose": "extract", "responses": [{"status": 429}, {"timeout": true}, "[\"...\"]"]}
//!   ],
//!   "embeddings": {"dimension": 64, "token_level": true},
//!   "pos": {"enabled": true}
//! }
//! ```
//!
//! The first chat rule whose matchers all accept a request answers it. Each
//! rule walks through its `responses` one call at a time and then keeps
//! repeating the last entry. A response is either plain text or an object
//! with `text`/`finish_reason`, an HTTP `status` (+ `body`), or `timeout`.
//!
//! Embeddings map each token to a one-hot vector in a hashed bucket; the
//! whole-text embedding is the sum of those. POS tags follow a fixed rule:
//! numbers are `NUM`, punctuation runs are `PUNCT`, everything else `X`.

use std::path::Path;
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatReply, ChatRequest, FinishReason, PosTagging, TokenEmbeddings, Transport, TransportError};
use crate::text;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub chat: Vec<ChatRule>,
    #[serde(default)]
    pub embeddings: EmbeddingMock,
    #[serde(default)]
    pub pos: PosMock,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChatRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonce: Option<u32>,
    pub responses: Vec<MockReply>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Text(String),
    Spec(ReplySpec),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finish_reason: Option<FinishReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default)]
    pub timeout: bool,
}

impl From<&str> for MockReply {
    fn from(s: &str) -> Self {
        MockReply::Text(s.to_string())
    }
}

impl ChatRule {
    pub fn new(purpose: &str, responses: &[&str]) -> Self {
        Self {
            purpose: Some(purpose.to_string()),
            responses: responses.iter().map(|r| MockReply::from(*r)).collect(),
            ..Self::default()
        }
    }

    pub fn when_user_contains(mut self, needle: &str) -> Self {
        self.user_contains = Some(needle.to_string());
        self
    }

    pub fn when_nonce(mut self, nonce: u32) -> Self {
        self.nonce = Some(nonce);
        self
    }

    fn matches(&self, req: &ChatRequest) -> bool {
        self.purpose.as_ref().is_none_or(|p| *p == req.purpose)
            && self.model.as_ref().is_none_or(|m| *m == req.model_tag)
            && self.nonce.is_none_or(|n| n == req.nonce)
            && self
                .system_contains
                .as_ref()
                .is_none_or(|s| req.system_prompt.contains(s.as_str()))
            && self
                .user_contains
                .as_ref()
                .is_none_or(|s| req.user_prompt.contains(s.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMock {
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "yes")]
    pub token_level: bool,
    /// Number of leading calls answered with a 503.
    #[serde(default)]
    pub transient_failures: u32,
}

impl Default for EmbeddingMock {
    fn default() -> Self {
        Self {
            dimension: default_dimension(),
            enabled: true,
            token_level: true,
            transient_failures: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosMock {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub transient_failures: u32,
}

impl Default for PosMock {
    fn default() -> Self {
        Self {
            enabled: true,
            transient_failures: 0,
        }
    }
}

fn default_dimension() -> usize {
    256
}

fn yes() -> bool {
    true
}

#[derive(Debug, Default)]
pub struct MockTransport {
    script: MockScript,
    cursors: Mutex<Vec<usize>>,
    chat_log: Mutex<Vec<ChatRequest>>,
    chat_calls: AtomicUsize,
    embed_calls: AtomicUsize,
    pos_calls: AtomicUsize,
    embed_failures_left: AtomicU32,
    pos_failures_left: AtomicU32,
}

impl MockTransport {
    pub fn new(script: MockScript) -> Self {
        Self {
            cursors: Mutex::new(vec![0; script.chat.len()]),
            embed_failures_left: AtomicU32::new(script.embeddings.transient_failures),
            pos_failures_left: AtomicU32::new(script.pos.transient_failures),
            script,
            ..Self::default()
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, String> {
        let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let script: MockScript = serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(Self::new(script))
    }

    /// Total calls that reached this transport, across capabilities.
    pub fn calls(&self) -> usize {
        self.chat_calls() + self.embed_calls.load(Ordering::SeqCst) + self.pos_calls.load(Ordering::SeqCst)
    }

    pub fn chat_calls(&self) -> usize {
        self.chat_calls.load(Ordering::SeqCst)
    }

    pub fn chat_log(&self) -> Vec<ChatRequest> {
        self.chat_log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn take_failure(counter: &AtomicU32) -> bool {
        counter
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
    }

    fn bucket(&self, token: &str) -> usize {
        (text::fnv1a64(token.as_bytes()) % self.script.embeddings.dimension.max(1) as u64) as usize
    }

    fn one_hot(&self, token: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.script.embeddings.dimension.max(1)];
        v[self.bucket(token)] = 1.0;
        v
    }

    fn embed_guard(&self) -> Result<(), TransportError> {
        self.embed_calls.fetch_add(1, Ordering::SeqCst);
        if !self.script.embeddings.enabled {
            return Err(TransportError::Capability("embeddings not scripted".into()));
        }
        if Self::take_failure(&self.embed_failures_left) {
            return Err(TransportError::Server {
                status: 503,
                body: "scripted transient failure".into(),
            });
        }
        Ok(())
    }
}

/// Rule tagger shared by the mock and the tests.
pub fn rule_tag(token: &str) -> &'static str {
    if token.chars().all(|c| c.is_numeric()) {
        "NUM"
    } else if !token.chars().any(char::is_alphanumeric) {
        "PUNCT"
    } else {
        "X"
    }
}

impl Transport for MockTransport {
    fn provider_id(&self) -> String {
        "mock".into()
    }

    fn chat(&self, req: &ChatRequest) -> Result<ChatReply, TransportError> {
        self.chat_calls.fetch_add(1, Ordering::SeqCst);
        self.chat_log
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(req.clone());
        let Some(idx) = self.script.chat.iter().position(|r| r.matches(req)) else {
            return Err(TransportError::Client {
                status: 404,
                body: format!("no scripted response for purpose '{}'", req.purpose),
            });
        };
        let rule = &self.script.chat[idx];
        let reply = {
            let mut cursors = self.cursors.lock().unwrap_or_else(|e| e.into_inner());
            let at = cursors[idx].min(rule.responses.len().saturating_sub(1));
            cursors[idx] += 1;
            rule.responses.get(at).cloned()
        };
        match reply {
            None => Ok(ChatReply {
                text: String::new(),
                finish_reason: FinishReason::Stop,
            }),
            Some(MockReply::Text(text)) => Ok(ChatReply {
                text,
                finish_reason: FinishReason::Stop,
            }),
            Some(MockReply::Spec(spec)) => {
                if spec.timeout {
                    return Err(TransportError::Timeout("scripted timeout".into()));
                }
                if let Some(status) = spec.status {
                    let body = spec.body.unwrap_or_default();
                    return Err(match status {
                        408 => TransportError::Timeout(body),
                        429 => TransportError::RateLimited(body),
                        500..=599 => TransportError::Server { status, body },
                        _ => TransportError::Client { status, body },
                    });
                }
                Ok(ChatReply {
                    text: spec.text.unwrap_or_default(),
                    finish_reason: spec.finish_reason.unwrap_or(FinishReason::Stop),
                })
            }
        }
    }

    fn embed_tokens(&self, _model: &str, text: &str) -> Result<TokenEmbeddings, TransportError> {
        self.embed_guard()?;
        if !self.script.embeddings.token_level {
            return Err(TransportError::Capability(
                "mock embedder is configured for whole-text output only".into(),
            ));
        }
        let tokens: Vec<String> = text::tokenize(text).into_iter().map(str::to_string).collect();
        let vectors = tokens.iter().map(|t| self.one_hot(t)).collect();
        Ok(TokenEmbeddings { tokens, vectors })
    }

    fn embed_text(&self, _model: &str, text: &str) -> Result<Vec<f64>, TransportError> {
        self.embed_guard()?;
        let mut v = vec![0.0; self.script.embeddings.dimension.max(1)];
        for token in text::tokenize(text) {
            v[self.bucket(token)] += 1.0;
        }
        Ok(v)
    }

    fn pos_tag(&self, _model: &str, text: &str) -> Result<PosTagging, TransportError> {
        self.pos_calls.fetch_add(1, Ordering::SeqCst);
        if !self.script.pos.enabled {
            return Err(TransportError::Capability("POS tagging not scripted".into()));
        }
        if Self::take_failure(&self.pos_failures_left) {
            return Err(TransportError::Server {
                status: 503,
                body: "scripted transient failure".into(),
            });
        }
        let tokens: Vec<String> = text::tokenize(text).into_iter().map(str::to_string).collect();
        let tags = tokens.iter().map(|t| rule_tag(t).to_string()).collect();
        Ok(PosTagging { tokens, tags })
    }
}
