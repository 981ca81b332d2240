//! Chat-completion style HTTP provider (`/chat/completions`, `/embeddings`).

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatProvider, ChatRequest, ChatResponse, Embedder, EmbeddingVector, LlmError, TokenUsage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpEndpoint {
    pub base_url: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for HttpEndpoint {
    fn default() -> Self {
        Self {
            base_url: std::env::var("OPENAI_BASE_URL").unwrap_or_else(|_| "https://api.openai.com/v1".to_string()),
            api_key_env: "OPENAI_API_KEY".to_string(),
            timeout_secs: 120,
        }
    }
}

/// Provider for any endpoint that speaks the OpenAI chat-completion dialect.
///
/// The blocking client is built on first use so that constructing the
/// provider inside an async runtime is harmless.
pub struct OpenAiCompatible {
    endpoint: HttpEndpoint,
    embedding_model: String,
    embedding_dim: usize,
    client: OnceLock<Result<reqwest::blocking::Client, String>>,
}

impl OpenAiCompatible {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        Self {
            endpoint,
            embedding_model: "text-embedding-3-large".to_string(),
            embedding_dim: 3072,
            client: OnceLock::new(),
        }
    }

    pub fn with_embedding_model(mut self, model: impl Into<String>, dim: usize) -> Self {
        self.embedding_model = model.into();
        self.embedding_dim = dim;
        self
    }

    fn client(&self) -> Result<&reqwest::blocking::Client, LlmError> {
        self.client
            .get_or_init(|| {
                reqwest::blocking::Client::builder()
                    .timeout(Duration::from_secs(self.endpoint.timeout_secs))
                    .build()
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| LlmError::TransportFailure(e.clone()))
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, LlmError> {
        let key = std::env::var(&self.endpoint.api_key_env).map_err(|_| {
            LlmError::ProviderRefusal(format!("environment variable {} is not set", self.endpoint.api_key_env))
        })?;
        let url = format!("{}/{}", self.endpoint.base_url.trim_end_matches('/'), path);
        let resp = self
            .client()?
            .post(&url)
            .bearer_auth(key)
            .json(body)
            .send()
            .map_err(|e| LlmError::TransportFailure(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| LlmError::TransportFailure(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(LlmError::TransportFailure(format!("{status}: {text}")));
        }
        if !status.is_success() {
            return Err(LlmError::ProviderRefusal(format!("{status}: {text}")));
        }
        serde_json::from_str(&text).map_err(|e| LlmError::ProviderRefusal(format!("bad response body: {e}")))
    }
}

impl ChatProvider for OpenAiCompatible {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let started = Instant::now();
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| {
                // tool-role messages need a tool_call_id upstream; send tool output as user text
                let role = match m.role {
                    super::Role::Tool => "user",
                    other => other.as_str(),
                };
                json!({ "role": role, "content": m.content })
            })
            .collect();
        let body = json!({
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });
        let value = self.post("chat/completions", &body)?;
        let content = value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| LlmError::ProviderRefusal("response has no message content".into()))?
            .to_string();
        let usage = TokenUsage {
            prompt_tokens: value.pointer("/usage/prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
            completion_tokens: value.pointer("/usage/completion_tokens").and_then(Value::as_u64).unwrap_or(0),
        };
        Ok(ChatResponse {
            content,
            usage,
            latency: started.elapsed(),
        })
    }

    fn name(&self) -> &str {
        "openai-compatible"
    }
}

impl Embedder for OpenAiCompatible {
    fn dimension(&self) -> usize {
        self.embedding_dim
    }

    fn id(&self) -> String {
        format!("{}@{}", self.embedding_model, self.endpoint.base_url)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, LlmError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let value = self.post("embeddings", &json!({ "model": self.embedding_model, "input": texts }))?;
        let data = value
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| LlmError::ProviderRefusal("embedding response has no data".into()))?;
        let mut indexed: Vec<(u64, EmbeddingVector)> = data
            .iter()
            .map(|item| {
                let idx = item.get("index").and_then(Value::as_u64).unwrap_or(0);
                let values = item
                    .get("embedding")
                    .and_then(Value::as_array)
                    .map(|a| a.iter().filter_map(Value::as_f64).collect())
                    .unwrap_or_default();
                (idx, EmbeddingVector { values })
            })
            .collect();
        indexed.sort_by_key(|(i, _)| *i);
        let vectors: Vec<EmbeddingVector> = indexed.into_iter().map(|(_, v)| v).collect();
        if vectors.iter().any(|v| v.dimension() != self.embedding_dim) {
            return Err(LlmError::ProviderRefusal(format!(
                "embedding dimension differs from configured {}",
                self.embedding_dim
            )));
        }
        Ok(vectors)
    }
}
