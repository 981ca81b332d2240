use crate::llm::{self, ChatMessage, ChatRequest, ModelSettings, ProviderHandle};

pub const STOPWORDS: &[&str] = &[
    "a", "about", "all", "an", "and", "any", "are", "as", "at", "be", "been", "by", "can", "did", "do", "does",
    "each", "for", "from", "give", "had", "has", "have", "how", "i", "in", "into", "is", "it", "its", "list",
    "many", "me", "much", "of", "on", "or", "please", "show", "than", "that", "the", "their", "them", "there",
    "these", "they", "this", "those", "to", "was", "were", "what", "when", "where", "which", "who", "whom",
    "whose", "why", "with", "you", "your",
];

/// Lowercased alphanumeric tokens of `question` minus [`STOPWORDS`], first
/// occurrence order, duplicates removed.
pub fn fallback_entities(question: &str) -> Vec<String> {
    let lowered = question.to_lowercase();
    let mut out: Vec<String> = Vec::new();
    for token in lowered.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        if STOPWORDS.contains(&token) || out.iter().any(|t| t == token) {
            continue;
        }
        out.push(token.to_string());
    }
    if out.is_empty() {
        out.push(question.trim().to_lowercase());
    }
    out
}

pub fn entity_prompt(question: &str) -> String {
    format!(
        "[ENTITIES] List the entities, attributes and literal values in the question that must be matched \
         against database tables and columns. Reply with a JSON array of strings only.\n\nQuestion: {question}"
    )
}

fn parse_entity_list(reply: &str) -> Option<Vec<String>> {
    let start = reply.find('[')?;
    let end = reply.rfind(']')?;
    if end < start {
        return None;
    }
    let items: Vec<serde_json::Value> = serde_json::from_str(&reply[start..=end]).ok()?;
    let out: Vec<String> = items
        .iter()
        .filter_map(|v| v.as_str())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    (!out.is_empty()).then_some(out)
}

/// Provider-based extraction; never fails. Unparseable replies and
/// provider errors fall back to [`fallback_entities`].
pub fn extract_entities(question: &str, provider: &ProviderHandle, model: &ModelSettings) -> Vec<String> {
    let request = ChatRequest::new(model, vec![ChatMessage::user(entity_prompt(question))]);
    match llm::complete(provider.as_ref(), &request) {
        Ok(reply) => parse_entity_list(&reply.content).unwrap_or_else(|| {
            tracing::info!("entity reply unparseable, using keyword fallback");
            fallback_entities(question)
        }),
        Err(e) => {
            tracing::warn!(error = %e, "entity extraction failed, using keyword fallback");
            fallback_entities(question)
        }
    }
}
