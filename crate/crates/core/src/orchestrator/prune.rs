use serde::{Deserialize, Serialize};

use super::{ContextError, SessionState};
use crate::llm::ChatMessage;
use crate::prompts::clip;
use crate::tokens;

/// One feedback message in the progress ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    /// Attempt index, or `None` for exploratory probe output.
    pub attempt: Option<usize>,
    pub message: ChatMessage,
}

fn cost(messages: &[&ChatMessage]) -> usize {
    messages.iter().map(|m| tokens::estimate(&m.content)).sum()
}

/// Fits `[fact sheet, feedback..., question]` into `limit_tokens`.
///
/// The fact sheet and the feedback of the first and most recent attempts
/// always stay; other feedback is dropped oldest first. If the two kept
/// attempts still do not fit, their text is clipped. The question is always
/// the final message, verbatim.
pub fn prune_messages(
    fact_sheet: &ChatMessage,
    feedback: &[Feedback],
    question: &str,
    limit_tokens: usize,
) -> Result<Vec<ChatMessage>, ContextError> {
    let question_msg = ChatMessage::user(question);
    let fixed = cost(&[fact_sheet, &question_msg]);
    if fixed > limit_tokens {
        return Err(ContextError::LimitTooSmall {
            limit: limit_tokens,
            needed: fixed,
        });
    }

    let first = feedback.iter().position(|f| f.attempt.is_some());
    let last = feedback.iter().rposition(|f| f.attempt.is_some());
    let protected = |i: usize| Some(i) == first || Some(i) == last;

    let mut keep: Vec<bool> = vec![true; feedback.len()];
    let total = |keep: &[bool]| fixed + feedback.iter().zip(keep).filter(|(_, k)| **k).map(|(f, _)| tokens::estimate(&f.message.content)).sum::<usize>();
    for i in 0..feedback.len() {
        if total(&keep) <= limit_tokens {
            break;
        }
        if !protected(i) {
            keep[i] = false;
        }
    }

    let mut kept: Vec<ChatMessage> = feedback
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(f, _)| f.message.clone())
        .collect();
    if total(&keep) > limit_tokens && !kept.is_empty() {
        let share_tokens = (limit_tokens - fixed) / kept.len();
        for m in &mut kept {
            m.content = clip(&m.content, (share_tokens * 4).saturating_sub(4).max(3));
        }
    }

    let mut out = Vec::with_capacity(kept.len() + 2);
    out.push(fact_sheet.clone());
    out.extend(kept);
    out.push(question_msg);
    Ok(out)
}

/// The session's fast-loop context pruned to `limit_tokens`.
pub fn prune_context(state: &SessionState, limit_tokens: usize) -> Result<Vec<ChatMessage>, ContextError> {
    prune_messages(&state.fact_sheet_message(), &state.feedback, &state.question, limit_tokens)
}
