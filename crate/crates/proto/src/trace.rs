//! Session trace log.
//!
//! A trace is stored as JSON Lines: the first line is a [`TraceHeader`], every
//! following line is one [`TraceEvent`]. Events are appended in the order the
//! state machine produced them and are never rewritten.

use serde::{Deserialize, Serialize};

use crate::session::{Action, AttemptRecord, ExecutionOutcome, FactSheet, Mode, SessionOutcome};

pub const TRACE_FORMAT: &str = "ledgersql.trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub trace_id: String,
    pub database_id: String,
    pub question: String,
}

impl TraceHeader {
    pub fn new(trace_id: impl Into<String>, database_id: impl Into<String>, question: impl Into<String>) -> Self {
        Self {
            format: TRACE_FORMAT.to_string(),
            version: TRACE_VERSION,
            trace_id: trace_id.into(),
            database_id: database_id.into(),
            question: question.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    ContextAssembled {
        bypass_used: bool,
        included_columns: usize,
        token_estimate: usize,
        entities: Vec<String>,
    },
    FactSheetCompiled {
        fact_sheet: FactSheet,
        repaired: bool,
        fallback: bool,
    },
    DecisionMade {
        action: Action,
        forced: bool,
        raw_reply: Option<String>,
    },
    ModeChanged {
        from: Mode,
        to: Mode,
        consecutive_failures: usize,
    },
    ContextCompressed {
        chars: usize,
    },
    ToolInvoked {
        tool: String,
        args: serde_json::Value,
    },
    ProbeFinished {
        sql: Option<String>,
        outcome: ExecutionOutcome,
    },
    AttemptFinished {
        attempt: AttemptRecord,
    },
    SessionFinished {
        outcome: SessionOutcome,
        attempts: usize,
    },
    SessionFailed {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
}

impl SessionTrace {
    pub fn attempts(&self) -> impl Iterator<Item = &AttemptRecord> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::AttemptFinished { attempt } => Some(attempt),
            _ => None,
        })
    }

    /// Tool names in invocation order.
    pub fn tool_calls(&self) -> Vec<&str> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::ToolInvoked { tool, .. } => Some(tool.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn to_jsonl(&self) -> serde_json::Result<String> {
        let mut out = serde_json::to_string(&self.header)?;
        out.push('\n');
        for event in &self.events {
            out.push_str(&serde_json::to_string(event)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header_line = lines.next().ok_or_else(|| "empty trace".to_string())?;
        let header: TraceHeader = serde_json::from_str(header_line).map_err(|e| e.to_string())?;
        if header.format != TRACE_FORMAT || header.version != TRACE_VERSION {
            return Err(format!(
                "unsupported trace format {} v{}",
                header.format, header.version
            ));
        }
        let events = lines
            .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { header, events })
    }
}
