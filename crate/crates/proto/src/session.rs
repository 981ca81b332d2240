//! Records produced while a question is being answered.

use serde::{Deserialize, Serialize};

use crate::table::ResultTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqlOrigin {
    OrchestratorEmit,
    Generator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSql {
    pub sql_text: String,
    pub dialect: String,
    pub origin: SqlOrigin,
}

/// Where and why a statement failed to parse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxDiagnostic {
    /// 1-based index of the offending token; 0 when the input has no tokens.
    pub token_index: usize,
    pub line: u64,
    pub column: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ParseOutcome {
    Ok,
    Diagnostic(SyntaxDiagnostic),
}

impl ParseOutcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, ParseOutcome::Ok)
    }
}

/// Statement classes the guardrail refuses to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockedClass {
    Insert,
    Update,
    Delete,
    Merge,
    Create,
    Alter,
    Drop,
    Truncate,
    Replace,
    /// Any other non-read statement (PRAGMA, ATTACH, transaction control, ...).
    OtherNonRead,
    /// Input that does not parse; never executed.
    Unparseable,
}

impl BlockedClass {
    pub const DML_VERBS: [BlockedClass; 9] = [
        BlockedClass::Insert,
        BlockedClass::Update,
        BlockedClass::Delete,
        BlockedClass::Merge,
        BlockedClass::Create,
        BlockedClass::Alter,
        BlockedClass::Drop,
        BlockedClass::Truncate,
        BlockedClass::Replace,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BlockedClass::Insert => "insert",
            BlockedClass::Update => "update",
            BlockedClass::Delete => "delete",
            BlockedClass::Merge => "merge",
            BlockedClass::Create => "create",
            BlockedClass::Alter => "alter",
            BlockedClass::Drop => "drop",
            BlockedClass::Truncate => "truncate",
            BlockedClass::Replace => "replace",
            BlockedClass::OtherNonRead => "non_read",
            BlockedClass::Unparseable => "unparseable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum GuardrailVerdict {
    Allow,
    Deny { class: BlockedClass, reason: String },
}

impl GuardrailVerdict {
    pub fn is_allow(&self) -> bool {
        matches!(self, GuardrailVerdict::Allow)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicReport {
    pub empty_result: bool,
    pub row_count: u64,
    pub magnitude_flag: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecErrorKind {
    Execution,
    Timeout,
    GuardrailViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExecutionOutcome {
    NotRun,
    Table { table: ResultTable },
    Error { kind: ExecErrorKind, message: String },
}

impl ExecutionOutcome {
    pub fn table(&self) -> Option<&ResultTable> {
        match self {
            ExecutionOutcome::Table { table } => Some(table),
            _ => None,
        }
    }

    pub fn error_message(&self) -> Option<&str> {
        match self {
            ExecutionOutcome::Error { message, .. } => Some(message),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Rejected,
}

/// Fast loop (orchestrator writes SQL itself) or slow loop (generator agent).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Fast,
    Slow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Emit,
    DelegateGenerate,
    DelegateExecute,
    Finalize,
}

/// One candidate query and everything learned from validating it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub index: usize,
    pub mode: Mode,
    /// `None` when the model reply contained no SQL at all.
    pub sql: Option<CandidateSql>,
    pub validation: Option<ParseOutcome>,
    pub guardrail: Option<GuardrailVerdict>,
    pub execution: ExecutionOutcome,
    pub heuristics: Option<HeuristicReport>,
    pub verdict: Verdict,
    pub rejection_reason: Option<String>,
    /// Set when an empty result was accepted after a reflection step.
    #[serde(default)]
    pub emptiness_affirmed: bool,
}

impl AttemptRecord {
    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accepted
    }

    pub fn sql_text(&self) -> Option<&str> {
        self.sql.as_ref().map(|c| c.sql_text.as_str())
    }

    pub fn guardrail_allowed(&self) -> bool {
        self.guardrail.as_ref().is_some_and(GuardrailVerdict::is_allow)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubQuestion {
    pub text: String,
    /// Indices of sub-questions that must be answered first.
    #[serde(default)]
    pub depends_on: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JoinPath {
    pub from_table: String,
    pub from_column: String,
    pub to_table: String,
    pub to_column: String,
}

/// The immutable task-ledger plan compiled once per session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactSheet {
    pub question: String,
    pub sub_questions: Vec<SubQuestion>,
    pub required_tables: Vec<String>,
    pub join_paths: Vec<JoinPath>,
    pub filters: Vec<String>,
    pub group_by: Vec<String>,
    pub metrics: Vec<String>,
    pub business_rules: Vec<String>,
}

impl FactSheet {
    pub fn minimal(question: impl Into<String>, business_rules: Vec<String>) -> Self {
        Self {
            question: question.into(),
            sub_questions: Vec::new(),
            required_tables: Vec::new(),
            join_paths: Vec::new(),
            filters: Vec::new(),
            group_by: Vec::new(),
            metrics: Vec::new(),
            business_rules,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    /// `None` only when no attempt ever passed the guardrail.
    pub final_sql: Option<String>,
    pub result: Option<ResultTable>,
    pub best_effort: bool,
    /// Index of the attempt the outcome was taken from.
    pub chosen_attempt: Option<usize>,
}
