//! Chat-completion and embedding providers behind one interface.
//!
//! Agents only ever see [`ChatProvider`] and [`Embedder`] trait objects, so the
//! same orchestration code runs against a hosted model, the scripted provider
//! used by the test suites, or a closure.

mod embed;
mod http;
mod retry;
mod scripted;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embed::{cosine, HashEmbedder, HASH_EMBED_DIM};
pub use http::{HttpEndpoint, OpenAiCompatible};
pub use retry::{RetryPolicy, RetryingEmbedder, RetryingProvider};
pub use scripted::{parse_script, ScriptEntry, ScriptReply, ScriptedProvider};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("chat request has no messages")]
    EmptyMessages,
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
    #[error("transport failure: {0}")]
    TransportFailure(String),
    #[error("provider refused the request: {0}")]
    ProviderRefusal(String),
    #[error("script exhausted")]
    ScriptExhausted,
    #[error("no script entry matches the request: {0}")]
    NoMatchingEntry(String),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("malformed script: {0}")]
    MalformedScript(String),
}

impl LlmError {
    /// Only transport-class failures are worth retrying.
    pub fn is_transient(&self) -> bool {
        matches!(self, LlmError::TransportFailure(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Tool => "tool",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }

    pub fn tool(content: impl Into<String>) -> Self {
        Self { role: Role::Tool, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub model_id: String,
}

impl ChatRequest {
    pub fn new(model: &ModelSettings, messages: Vec<ChatMessage>) -> Self {
        Self {
            messages,
            temperature: model.temperature,
            max_output_tokens: model.max_output_tokens,
            model_id: model.model_id.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let last = self.messages.last().ok_or(LlmError::EmptyMessages)?;
        if !matches!(last.role, Role::User | Role::Tool) {
            return Err(LlmError::InvalidRequest(format!(
                "last message must come from user or tool, found {}",
                last.role.as_str()
            )));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        Ok(())
    }

    /// All message contents joined by newlines; used for pattern routing.
    pub fn transcript(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub content: String,
    pub usage: TokenUsage,
    pub latency: Duration,
}

/// Model id and sampling settings for one agent role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            model_id: "gpt-4o".to_string(),
            temperature: 0.0,
            max_output_tokens: 2048,
        }
    }
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;

    fn name(&self) -> &str {
        "provider"
    }
}

pub type ProviderHandle = Arc<dyn ChatProvider>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    /// Stable identifier; an index built by one embedder is only queried with
    /// the same one.
    fn id(&self) -> String;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, LlmError>;
}

pub type EmbedderHandle = Arc<dyn Embedder>;

/// Validates `request` and forwards it to `provider`.
pub fn complete(provider: &dyn ChatProvider, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
    request.validate()?;
    provider.complete(request)
}

pub fn embed_batch(embedder: &dyn Embedder, texts: &[String]) -> Result<Vec<EmbeddingVector>, LlmError> {
    if texts.iter().any(|t| t.is_empty()) {
        return Err(LlmError::EmptyText);
    }
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let vectors = embedder.embed_batch(texts)?;
    if vectors.len() != texts.len() {
        return Err(LlmError::TransportFailure(format!(
            "embedder returned {} vectors for {} inputs",
            vectors.len(),
            texts.len()
        )));
    }
    Ok(vectors)
}

/// Provider backed by a closure. Handy for randomized tests.
pub struct FnProvider<F> {
    f: F,
}

impl<F> FnProvider<F>
where
    F: Fn(&ChatRequest) -> Result<String, LlmError> + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self { f }
    }
}

impl<F> ChatProvider for FnProvider<F>
where
    F: Fn(&ChatRequest) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let content = (self.f)(request)?;
        Ok(ChatResponse {
            content,
            usage: TokenUsage::default(),
            latency: Duration::ZERO,
        })
    }

    fn name(&self) -> &str {
        "fn"
    }
}

/// Wraps a provider and keeps a copy of every request it forwards.
pub struct RecordingProvider {
    inner: ProviderHandle,
    requests: Mutex<Vec<ChatRequest>>,
}

impl RecordingProvider {
    pub fn new(inner: ProviderHandle) -> Self {
        Self {
            inner,
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().expect("recording lock").clone()
    }
}

impl ChatProvider for RecordingProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        self.requests.lock().expect("recording lock").push(request.clone());
        self.inner.complete(request)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest::new(&ModelSettings::default(), messages)
    }

    #[test]
    fn empty_messages_rejected() {
        let provider = ScriptedProvider::new(vec![ScriptEntry::text("*", "SELECT 1")]).unwrap();
        assert_eq!(complete(&provider, &req(vec![])).unwrap_err(), LlmError::EmptyMessages);
    }

    #[test]
    fn last_message_must_be_user_or_tool() {
        let r = req(vec![ChatMessage::user("q"), ChatMessage::assistant("a")]);
        assert!(matches!(r.validate(), Err(LlmError::InvalidRequest(_))));
        let r = req(vec![ChatMessage::user("q"), ChatMessage::tool("result")]);
        assert!(r.validate().is_ok());
    }

    #[test]
    fn temperature_bounds() {
        let mut r = req(vec![ChatMessage::user("q")]);
        r.temperature = 1.2;
        assert!(r.validate().is_err());
        r.temperature = 1.0;
        assert!(r.validate().is_ok());
    }

    #[test]
    fn embed_batch_empty_and_empty_text() {
        let e = HashEmbedder::default();
        assert!(embed_batch(&e, &[]).unwrap().is_empty());
        assert_eq!(embed_batch(&e, &["".to_string()]).unwrap_err(), LlmError::EmptyText);
    }

    #[test]
    fn complete_does_not_mutate_request() {
        let provider = ScriptedProvider::new(vec![ScriptEntry::text("*", "SELECT 1")]).unwrap();
        let r = req(vec![ChatMessage::system("s"), ChatMessage::user("q")]);
        let before = r.clone();
        let resp = complete(&provider, &r).unwrap();
        assert_eq!(resp.content, "SELECT 1");
        assert_eq!(r, before);
    }
}
