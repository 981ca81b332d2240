use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatProvider, ChatRequest, ChatResponse, Embedder, EmbedderHandle, EmbeddingVector, LlmError, ProviderHandle};

/// Exponential backoff on transport-class failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts including the first one.
    pub max_attempts: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(200),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_delay: Duration::ZERO,
        }
    }

    /// Delay before retry number `retry` (0-based): `base · 2^retry`.
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << retry.min(16))
    }

    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, LlmError>) -> Result<T, LlmError> {
        let attempts = self.max_attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() => {
                    tracing::warn!(attempt = attempt + 1, error = %e, "transient provider failure");
                    last = Some(e);
                    if attempt + 1 < attempts {
                        std::thread::sleep(self.delay(attempt));
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.unwrap_or_else(|| LlmError::TransportFailure("no attempts made".into())))
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

pub struct RetryingProvider {
    inner: ProviderHandle,
    policy: RetryPolicy,
}

impl RetryingProvider {
    pub fn new(inner: ProviderHandle, policy: RetryPolicy) -> Self {
        Self { inner, policy }
    }
}

impl ChatProvider for RetryingProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        self.policy.run(|| self.inner.complete(request))
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

pub struct RetryingEmbedder {
    inner: EmbedderHandle,
    policy: RetryPolicy,
}

impl RetryingEmbedder {
    pub fn new(inner: EmbedderHandle, policy: RetryPolicy) -> Self {
        Self { inner, policy }
    }
}

impl Embedder for RetryingEmbedder {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn id(&self) -> String {
        self.inner.id()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, LlmError> {
        self.policy.run(|| self.inner.embed_batch(texts))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::llm::{ChatMessage, ModelSettings, ScriptEntry, ScriptedProvider};

    fn request() -> ChatRequest {
        ChatRequest::new(&ModelSettings::default(), vec![ChatMessage::user("q")])
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(0), Duration::from_millis(200));
        assert_eq!(p.delay(1), Duration::from_millis(400));
        assert_eq!(p.delay(2), Duration::from_millis(800));
    }

    #[test]
    fn fail_twice_then_succeed_on_third_attempt() {
        let script = Arc::new(
            ScriptedProvider::new(vec![
                ScriptEntry::transport("*", "reset"),
                ScriptEntry::transport("*", "reset"),
                ScriptEntry::text("*", "SELECT 1"),
            ])
            .unwrap(),
        );
        let p = RetryingProvider::new(script.clone(), RetryPolicy::immediate(3));
        assert_eq!(p.complete(&request()).unwrap().content, "SELECT 1");
        assert_eq!(script.calls(), 3);
    }

    #[test]
    fn transport_failure_surfaces_after_budget() {
        let script = Arc::new(
            ScriptedProvider::new((0..5).map(|_| ScriptEntry::transport("*", "down")).collect()).unwrap(),
        );
        let p = RetryingProvider::new(script.clone(), RetryPolicy::immediate(3));
        assert!(matches!(p.complete(&request()), Err(LlmError::TransportFailure(_))));
        assert_eq!(script.calls(), 3);
    }

    #[test]
    fn refusal_not_retried() {
        let script = Arc::new(
            ScriptedProvider::from_script(">>> *\n!refusal policy\n>>> *\nSELECT 1").unwrap(),
        );
        let p = RetryingProvider::new(script.clone(), RetryPolicy::immediate(3));
        assert_eq!(
            p.complete(&request()).unwrap_err(),
            LlmError::ProviderRefusal("policy".into())
        );
        assert_eq!(script.calls(), 1);
    }
}
