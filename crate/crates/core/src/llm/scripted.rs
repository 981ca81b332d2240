//! Deterministic provider that replays a script of canned replies.
//!
//! Script file format, one record per entry:
//!
//! ```text
//! # comments are allowed before the first record
//! >>> FACT_SHEET
//! {"required_tables": ["loan"]}
//! >>>* DECIDE
//! EMIT
//! >>> *
//! !transport connection reset
//! ```
//!
//! `>>> pattern` starts a record that is consumed by the first request whose
//! transcript contains `pattern` (`*` matches everything). `>>>* pattern`
//! starts a sticky record that is never consumed. The reply is every line up
//! to the next record header, with trailing blank lines removed. A reply of the
//! form `!transport <msg>` or `!refusal <msg>` injects a provider failure.

use std::sync::Mutex;
use std::time::Duration;

use super::{ChatProvider, ChatRequest, ChatResponse, LlmError, TokenUsage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptReply {
    Text(String),
    Transport(String),
    Refusal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptEntry {
    pub pattern: String,
    pub reply: ScriptReply,
    pub sticky: bool,
}

impl ScriptEntry {
    pub fn text(pattern: impl Into<String>, reply: impl Into<String>) -> Self {
        Self {
            pattern: pattern.into(),
            reply: ScriptReply::Text(reply.into()),
            sticky: false,
        }
    }

    pub fn sticky(pattern: impl Into<String>, reply: impl Into<String>) -> Self {
        Self {
            sticky: true,
            ..Self::text(pattern, reply)
        }
    }

    pub fn transport(pattern: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            pattern: pattern.into(),
            reply: ScriptReply::Transport(message.into()),
            sticky: false,
        }
    }

    fn matches(&self, transcript: &str) -> bool {
        self.pattern == "*" || transcript.contains(&self.pattern)
    }
}

pub fn parse_script(text: &str) -> Result<Vec<ScriptEntry>, LlmError> {
    let mut entries = Vec::new();
    let mut current: Option<(String, bool, Vec<&str>)> = None;

    fn finish(entries: &mut Vec<ScriptEntry>, (pattern, sticky, mut lines): (String, bool, Vec<&str>)) {
        while lines.last().is_some_and(|l| l.trim().is_empty()) {
            lines.pop();
        }
        let body = lines.join("\n");
        let reply = if let Some(msg) = body.strip_prefix("!transport") {
            ScriptReply::Transport(msg.trim().to_string())
        } else if let Some(msg) = body.strip_prefix("!refusal") {
            ScriptReply::Refusal(msg.trim().to_string())
        } else {
            ScriptReply::Text(body)
        };
        entries.push(ScriptEntry { pattern, reply, sticky });
    }

    for line in text.lines() {
        let header = line
            .strip_prefix(">>>*")
            .map(|p| (p, true))
            .or_else(|| line.strip_prefix(">>>").map(|p| (p, false)));
        if let Some((pattern, sticky)) = header {
            let pattern = pattern.trim();
            if pattern.is_empty() {
                return Err(LlmError::MalformedScript("record header without a pattern".into()));
            }
            if let Some(done) = current.take() {
                finish(&mut entries, done);
            }
            current = Some((pattern.to_string(), sticky, Vec::new()));
        } else if let Some((_, _, lines)) = current.as_mut() {
            lines.push(line);
        } else if !(line.trim().is_empty() || line.trim_start().starts_with('#')) {
            return Err(LlmError::MalformedScript(format!("text outside a record: {line:?}")));
        }
    }
    if let Some(done) = current.take() {
        finish(&mut entries, done);
    }
    if entries.is_empty() {
        return Err(LlmError::MalformedScript("script has no records".into()));
    }
    Ok(entries)
}

#[derive(Debug)]
struct ScriptState {
    consumed: Vec<bool>,
    calls: usize,
}

#[derive(Debug)]
pub struct ScriptedProvider {
    entries: Vec<ScriptEntry>,
    state: Mutex<ScriptState>,
}

impl ScriptedProvider {
    pub fn new(entries: Vec<ScriptEntry>) -> Result<Self, LlmError> {
        if entries.is_empty() {
            return Err(LlmError::MalformedScript("script has no records".into()));
        }
        let consumed = vec![false; entries.len()];
        Ok(Self {
            entries,
            state: Mutex::new(ScriptState { consumed, calls: 0 }),
        })
    }

    pub fn from_script(text: &str) -> Result<Self, LlmError> {
        Self::new(parse_script(text)?)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::MalformedScript(format!("{}: {e}", path.display())))?;
        Self::from_script(&text)
    }

    /// Number of `complete` calls seen so far, including failed ones.
    pub fn calls(&self) -> usize {
        self.state.lock().expect("script lock").calls
    }

    /// Consumable entries that have not been used yet.
    pub fn remaining(&self) -> usize {
        let state = self.state.lock().expect("script lock");
        self.entries
            .iter()
            .zip(&state.consumed)
            .filter(|(e, used)| !e.sticky && !**used)
            .count()
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let transcript = request.transcript();
        let mut state = self.state.lock().expect("script lock");
        state.calls += 1;

        let hit = self
            .entries
            .iter()
            .enumerate()
            .find(|(i, e)| (e.sticky || !state.consumed[*i]) && e.matches(&transcript));

        let Some((i, entry)) = hit else {
            let any_left = self
                .entries
                .iter()
                .zip(&state.consumed)
                .any(|(e, used)| !e.sticky && !used);
            return if any_left {
                let head: String = transcript.chars().take(80).collect();
                Err(LlmError::NoMatchingEntry(head))
            } else {
                Err(LlmError::ScriptExhausted)
            };
        };
        if !entry.sticky {
            state.consumed[i] = true;
        }
        match &entry.reply {
            ScriptReply::Text(content) => Ok(ChatResponse {
                content: content.clone(),
                usage: TokenUsage {
                    prompt_tokens: crate::tokens::estimate(&transcript) as u64,
                    completion_tokens: crate::tokens::estimate(content) as u64,
                },
                latency: Duration::ZERO,
            }),
            ScriptReply::Transport(msg) => Err(LlmError::TransportFailure(msg.clone())),
            ScriptReply::Refusal(msg) => Err(LlmError::ProviderRefusal(msg.clone())),
        }
    }

    fn name(&self) -> &str {
        "scripted"
    }
}
