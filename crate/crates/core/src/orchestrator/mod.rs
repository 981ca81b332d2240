//! The ledger-driven session state machine.
//!
//! A session compiles an immutable [`FactSheet`] once, then loops: decide an
//! action, produce a candidate (fast: the orchestrator writes it; slow: the
//! generator does), validate it by parsing, guarding, executing and
//! inspecting the result, and record an attempt. It stops on the first
//! accepted attempt or when the attempt budget is spent.

mod compress;
mod decide;
mod factsheet;
mod prune;
mod session;
mod trace;

use thiserror::Error;

use crate::llm::LlmError;
use crate::retrieval::RetrievalError;

pub use compress::{compress_history, strategy_label, CompressedContext, MIN_COMPRESSION_CAP};
pub use decide::{decide_action, parse_decision, Decision, DECIDE_MARKER};
pub use factsheet::{compile_fact_sheet, parse_fact_sheet, FACT_SHEET_MARKER};
pub use prune::{prune_context, prune_messages, Feedback};
pub use session::{
    attempt_summary, best_effort_rank, run_session, SessionRequest, SessionState, EMIT_MARKER, PROBE_MARKER,
    REFLECT_MARKER,
};
pub use trace::{JsonlTraceWriter, TraceSink};

pub use crate::proto::FactSheet;

#[derive(Debug, Error)]
pub enum FactSheetError {
    #[error("planner reply unparseable after one repair prompt")]
    PlannerUnparseable { reply: String },
    #[error(transparent)]
    Provider(#[from] LlmError),
}

/// Failure of one provider-backed step inside a session.
#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Provider(#[from] LlmError),
    #[error(transparent)]
    Context(#[from] ContextError),
}

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("limit of {limit} tokens cannot hold the fact sheet and question ({needed} tokens)")]
    LimitTooSmall { limit: usize, needed: usize },
}

/// A session-level failure. Model mistakes never end up here; they become
/// rejected attempts and best-effort outcomes.
#[derive(Debug, Error)]
pub enum SessionError {
    #[error("schema context assembly failed: {0}")]
    Context(#[from] RetrievalError),
    #[error("planner failed: {0}")]
    Planner(LlmError),
    #[error("session step failed: {source}")]
    Step {
        source: StepError,
        partial: Box<SessionState>,
    },
    #[error("trace write failed: {0}")]
    Trace(#[from] std::io::Error),
}

impl SessionError {
    pub fn partial(&self) -> Option<&SessionState> {
        match self {
            SessionError::Step { partial, .. } => Some(partial),
            _ => None,
        }
    }
}
