use super::{prune_context, SessionState, StepError};
use crate::config::SessionConfig;
use crate::llm::{self, ChatMessage, ChatRequest, ProviderHandle};
use crate::proto::{Action, Mode};

pub const DECIDE_MARKER: &str = "[DECIDE]";

const DECIDE_SYSTEM: &str = "[DECIDE] You are the orchestrator of a text-to-SQL system. Choose the next action \
and reply with exactly one word: EMIT to write the SQL yourself, GENERATE to delegate to the SQL generator, \
EXECUTE to run an exploratory query against the database first.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub action: Action,
    /// Decided by rule, without asking the model.
    pub forced: bool,
    pub raw_reply: Option<String>,
}

/// Reads a one-word action tag; `None` when the reply is not one.
pub fn parse_decision(reply: &str) -> Option<Action> {
    let word: String = reply
        .trim_start_matches(|c: char| !c.is_ascii_alphabetic())
        .chars()
        .take_while(|c| c.is_ascii_alphabetic() || *c == '_')
        .collect::<String>()
        .to_ascii_uppercase();
    match word.as_str() {
        "EMIT" => Some(Action::Emit),
        "GENERATE" | "DELEGATE_GENERATE" => Some(Action::DelegateGenerate),
        "EXECUTE" | "DELEGATE_EXECUTE" => Some(Action::DelegateExecute),
        "FINALIZE" => Some(Action::Finalize),
        _ => None,
    }
}

/// Next action for `state`.
///
/// Finalize when the latest attempt was accepted and forced delegation once
/// the consecutive failures reach the escalation threshold; neither asks
/// the model. Otherwise the model's tag is used, with these corrections:
/// unparseable replies become Emit, Finalize without an accepted attempt
/// becomes Emit, Generate below the threshold in the fast loop becomes Emit,
/// and Execute with no probes left becomes Emit.
pub fn decide_action(state: &SessionState, config: &SessionConfig, provider: &ProviderHandle) -> Result<Decision, StepError> {
    if state.attempts.last().is_some_and(|a| a.accepted()) {
        return Ok(Decision {
            action: Action::Finalize,
            forced: true,
            raw_reply: None,
        });
    }
    if state.consecutive_failures >= config.escalation_threshold {
        return Ok(Decision {
            action: Action::DelegateGenerate,
            forced: true,
            raw_reply: None,
        });
    }

    let system = ChatMessage::system(DECIDE_SYSTEM);
    let limit = config.prompt_limit_tokens.saturating_sub(crate::tokens::estimate(&system.content));
    let mut messages = vec![system];
    messages.extend(prune_context(state, limit)?);
    let reply = llm::complete(provider.as_ref(), &ChatRequest::new(&config.orchestrator, messages))?;
    let requested = parse_decision(&reply.content);
    let action = match requested {
        Some(Action::DelegateGenerate) if state.mode == Mode::Slow => Action::DelegateGenerate,
        Some(Action::DelegateExecute) if state.probes_used < config.probe_budget => Action::DelegateExecute,
        Some(Action::Emit) => Action::Emit,
        other => {
            tracing::info!(requested = ?other, "decision replaced by Emit");
            Action::Emit
        }
    };
    Ok(Decision {
        action,
        forced: false,
        raw_reply: Some(reply.content),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags() {
        assert_eq!(parse_decision("EMIT"), Some(Action::Emit));
        assert_eq!(parse_decision("**execute**\nbecause..."), Some(Action::DelegateExecute));
        assert_eq!(parse_decision("Generate."), Some(Action::DelegateGenerate));
        assert_eq!(parse_decision("I would emit"), None);
        assert_eq!(parse_decision(""), None);
    }
}
