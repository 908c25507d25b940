//! JSON-over-HTTP transport.
//!
//! Chat uses the common chat-completions shape:
//! request `{model, messages, temperature, max_tokens, seed}`, response
//! `{choices: [{message: {content}, finish_reason}]}`.
//!
//! Embeddings: request `{model, input, granularity: "token" | "text"}`.
//! Token granularity answers `{tokens: [..], vectors: [[..], ..]}`; text
//! granularity answers `{embedding: [..]}` or `{data: [{embedding: [..]}]}`.
//!
//! POS tagging: request `{model, text}`, response `{tokens: [..], tags: [..]}`.

use std::time::Duration;

use reqwest::blocking::Client;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{ChatReply, ChatRequest, FinishReason, PosTagging, TokenEmbeddings, Transport, TransportError};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HttpEndpoints {
    pub chat: Option<String>,
    pub embed: Option<String>,
    pub pos: Option<String>,
}

#[derive(Debug)]
pub struct HttpTransport {
    client: Client,
    endpoints: HttpEndpoints,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(endpoints: HttpEndpoints, api_key: Option<String>, timeout: Duration) -> Result<Self, TransportError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(Self {
            client,
            endpoints,
            api_key,
        })
    }

    fn post(&self, url: &str, body: &Value) -> Result<Value, TransportError> {
        let mut req = self.client.post(url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout(e.to_string())
            } else {
                TransportError::Network(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout(e.to_string())
            } else {
                TransportError::Network(e.to_string())
            }
        })?;
        match status {
            200..=299 => serde_json::from_str(&text).map_err(|e| TransportError::Decode(e.to_string())),
            408 => Err(TransportError::Timeout(text)),
            429 => Err(TransportError::RateLimited(text)),
            500..=599 => Err(TransportError::Server { status, body: text }),
            _ => Err(TransportError::Client { status, body: text }),
        }
    }

    fn endpoint<'a>(&self, url: &'a Option<String>, what: &str) -> Result<&'a str, TransportError> {
        url.as_deref()
            .ok_or_else(|| TransportError::Capability(format!("no {what} endpoint configured")))
    }
}

#[derive(Deserialize)]
struct ChatCompletion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

pub(crate) fn parse_chat(value: Value) -> Result<ChatReply, TransportError> {
    let completion: ChatCompletion =
        serde_json::from_value(value).map_err(|e| TransportError::Decode(e.to_string()))?;
    let choice = completion
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| TransportError::Decode("no choices in completion".into()))?;
    let finish_reason = match choice.finish_reason.as_deref() {
        None | Some("stop") => FinishReason::Stop,
        Some("length") => FinishReason::Length,
        Some(_) => FinishReason::Error,
    };
    Ok(ChatReply {
        text: choice.message.content.unwrap_or_default(),
        finish_reason,
    })
}

impl Transport for HttpTransport {
    fn provider_id(&self) -> String {
        format!(
            "http:{}|{}|{}",
            self.endpoints.chat.as_deref().unwrap_or(""),
            self.endpoints.embed.as_deref().unwrap_or(""),
            self.endpoints.pos.as_deref().unwrap_or("")
        )
    }

    fn chat(&self, req: &ChatRequest) -> Result<ChatReply, TransportError> {
        let url = self.endpoint(&self.endpoints.chat, "chat")?;
        let body = json!({
            "model": req.model_tag,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "seed": req.nonce,
        });
        parse_chat(self.post(url, &body)?)
    }

    fn embed_tokens(&self, model: &str, text: &str) -> Result<TokenEmbeddings, TransportError> {
        let url = self.endpoint(&self.endpoints.embed, "embedding")?;
        let value = self.post(url, &json!({"model": model, "input": text, "granularity": "token"}))?;
        if value.get("tokens").is_none() || value.get("vectors").is_none() {
            return Err(TransportError::Capability(
                "embedding provider returned no token-level output".into(),
            ));
        }
        serde_json::from_value(value).map_err(|e| TransportError::Decode(e.to_string()))
    }

    fn embed_text(&self, model: &str, text: &str) -> Result<Vec<f64>, TransportError> {
        let url = self.endpoint(&self.endpoints.embed, "embedding")?;
        let value = self.post(url, &json!({"model": model, "input": text, "granularity": "text"}))?;
        let emb = value
            .get("embedding")
            .or_else(|| value.pointer("/data/0/embedding"))
            .cloned()
            .ok_or_else(|| TransportError::Decode("no embedding in response".into()))?;
        serde_json::from_value(emb).map_err(|e| TransportError::Decode(e.to_string()))
    }

    fn pos_tag(&self, model: &str, text: &str) -> Result<PosTagging, TransportError> {
        let url = self.endpoint(&self.endpoints.pos, "POS")?;
        let value = self.post(url, &json!({"model": model, "text": text}))?;
        serde_json::from_value(value).map_err(|e| TransportError::Decode(e.to_string()))
    }
}
