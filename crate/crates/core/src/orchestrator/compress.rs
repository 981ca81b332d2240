use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::prompts::{clip, one_line};
use crate::proto::{AttemptRecord, ExecErrorKind, ExecutionOutcome, GuardrailVerdict, Mode, ParseOutcome};

pub const MIN_COMPRESSION_CAP: usize = 1_000;

/// Characters reserved for section headers and separators.
const OVERHEAD: usize = 200;
const HISTORY_SLOTS: usize = 4;
const LABEL_SLOTS: usize = 4;

/// The four-part summary that replaces raw retry history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressedContext {
    pub question: String,
    /// e.g. "showing 4 of 10".
    pub history_header: String,
    pub attempt_history: Vec<String>,
    pub latest_error: Option<String>,
    pub avoid_instruction: String,
}

impl CompressedContext {
    pub fn render(&self) -> String {
        let mut out = format!("Question: {}\n\nAttempt history ({}):\n", self.question, self.history_header);
        for line in &self.attempt_history {
            out.push_str("- ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("\nLatest error: ");
        out.push_str(self.latest_error.as_deref().unwrap_or("none"));
        out.push_str("\n\n");
        out.push_str(&self.avoid_instruction);
        out
    }
}

fn failure_kind(a: &AttemptRecord) -> &'static str {
    if a.sql.is_none() {
        return "no SQL";
    }
    if matches!(a.validation, Some(ParseOutcome::Diagnostic(_))) {
        return "syntax error";
    }
    if matches!(a.guardrail, Some(GuardrailVerdict::Deny { .. })) {
        return "guardrail denial";
    }
    match &a.execution {
        ExecutionOutcome::Error { kind: ExecErrorKind::Timeout, .. } => return "timeout",
        ExecutionOutcome::Error { .. } => return "execution error",
        _ => {}
    }
    match &a.heuristics {
        Some(h) if h.magnitude_flag => "row-count magnitude",
        Some(h) if h.empty_result => "empty result",
        _ => "rejected",
    }
}

fn referenced_tables(sql: &str) -> Vec<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r#"(?i)\b(?:from|join)\s+["`\[]?([A-Za-z_][A-Za-z0-9_]*)"#).unwrap());
    let mut out: Vec<String> = Vec::new();
    for c in re.captures_iter(sql) {
        let t = c[1].to_lowercase();
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out.sort();
    out
}

/// Failure category plus the tables the query touched, e.g.
/// "empty result over account, loan".
pub fn strategy_label(a: &AttemptRecord) -> String {
    let kind = failure_kind(a);
    match a.sql_text().map(referenced_tables) {
        Some(t) if !t.is_empty() => format!("{kind} over {}", t.join(", ")),
        _ => kind.to_string(),
    }
}

pub(crate) fn outcome_summary(a: &AttemptRecord) -> String {
    if let Some(ParseOutcome::Diagnostic(d)) = &a.validation {
        return format!("syntax error at line {} column {}", d.line, d.column);
    }
    if let Some(GuardrailVerdict::Deny { class, .. }) = &a.guardrail {
        return format!("denied ({})", class.label());
    }
    match &a.execution {
        ExecutionOutcome::Error { message, .. } => format!("error: {}", one_line(message)),
        ExecutionOutcome::Table { .. } => match &a.heuristics {
            Some(h) if h.magnitude_flag => format!("{} rows, over the magnitude threshold", h.row_count),
            Some(h) if h.empty_result => "0 rows".to_string(),
            Some(h) => format!("{} rows", h.row_count),
            None => "executed".to_string(),
        },
        ExecutionOutcome::NotRun => a.rejection_reason.clone().unwrap_or_else(|| "not run".into()),
    }
}

fn history_line(a: &AttemptRecord, max: usize) -> String {
    let mode = match a.mode {
        Mode::Fast => "fast",
        Mode::Slow => "slow",
    };
    let sql = a.sql_text().map(one_line).unwrap_or_else(|| "(no SQL)".into());
    let outcome = outcome_summary(a);
    let budget = max.saturating_sub(outcome.chars().count() + 16).max(20);
    clip(&format!("#{} [{mode}] {} -> {outcome}", a.index, clip(&sql, budget)), max)
}

/// Bounded summary of the failed attempts so far: the question, the first
/// attempt plus the three most recent, the latest error and an instruction
/// to avoid the failed strategies. The rendering never exceeds `cap`
/// characters (at least [`MIN_COMPRESSION_CAP`]), whatever the attempt count.
pub fn compress_history(question: &str, attempts: &[AttemptRecord], cap: usize) -> CompressedContext {
    let cap = cap.max(MIN_COMPRESSION_CAP);
    let room = cap - OVERHEAD;
    let question_max = room * 15 / 100;
    let line_max = room * 15 / 100;
    let error_max = room / 10;
    let label_max = room / 50;

    let failed: Vec<&AttemptRecord> = attempts.iter().filter(|a| !a.accepted()).collect();
    let shown: Vec<&AttemptRecord> = if failed.len() <= HISTORY_SLOTS {
        failed.clone()
    } else {
        std::iter::once(failed[0])
            .chain(failed[failed.len() - (HISTORY_SLOTS - 1)..].iter().copied())
            .collect()
    };
    let attempt_history = shown.iter().map(|a| history_line(a, line_max)).collect();
    let latest_error = failed
        .last()
        .map(|a| clip(&one_line(a.rejection_reason.as_deref().unwrap_or("rejected")), error_max));

    let mut labels: Vec<String> = Vec::new();
    for a in &failed {
        let l = strategy_label(a);
        labels.retain(|x| *x != l);
        labels.push(l);
    }
    let dropped = labels.len().saturating_sub(LABEL_SLOTS);
    let mut avoid = String::from("Do not repeat these failed strategies: ");
    avoid.push_str(
        &labels[dropped..]
            .iter()
            .map(|l| clip(l, label_max))
            .collect::<Vec<_>>()
            .join("; "),
    );
    if dropped > 0 {
        avoid.push_str(&format!(" (+{dropped} earlier)"));
    }
    avoid.push('.');

    CompressedContext {
        question: clip(&one_line(question), question_max),
        history_header: format!("showing {} of {}", shown.len(), failed.len()),
        attempt_history,
        latest_error,
        avoid_instruction: avoid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proto::{CandidateSql, HeuristicReport, SqlOrigin, Verdict};

    fn failed(index: usize, sql: &str, reason: &str) -> AttemptRecord {
        AttemptRecord {
            index,
            mode: Mode::Fast,
            sql: Some(CandidateSql {
                sql_text: sql.into(),
                dialect: "sqlite".into(),
                origin: SqlOrigin::OrchestratorEmit,
            }),
            validation: Some(ParseOutcome::Ok),
            guardrail: Some(GuardrailVerdict::Allow),
            execution: ExecutionOutcome::Table {
                table: crate::proto::ResultTable::new(vec!["n".into()], vec![]),
            },
            heuristics: Some(HeuristicReport {
                empty_result: true,
                row_count: 0,
                magnitude_flag: false,
                notes: vec![],
            }),
            verdict: Verdict::Rejected,
            rejection_reason: Some(reason.into()),
            emptiness_affirmed: false,
        }
    }

    #[test]
    fn single_failure() {
        let a = failed(1, "SELECT * FROM loan WHERE 0", "empty result");
        let c = compress_history("q?", &[a], 4000);
        assert_eq!(c.attempt_history.len(), 1);
        assert_eq!(c.latest_error.as_deref(), Some("empty result"));
        assert_eq!(c.history_header, "showing 1 of 1");
    }

    #[test]
    fn labels_deduplicated() {
        let attempts = vec![
            failed(1, "SELECT * FROM loan WHERE 0", "empty"),
            failed(2, "SELECT * FROM loan WHERE 1 = 0", "empty"),
            failed(3, "SELECT * FROM account WHERE 0", "empty"),
        ];
        let c = compress_history("q?", &attempts, 4000);
        assert_eq!(c.avoid_instruction.matches("empty result over loan").count(), 1);
        assert_eq!(c.avoid_instruction.matches("empty result over account").count(), 1);
    }

    #[test]
    fn size_independent_of_attempt_count() {
        let many: Vec<AttemptRecord> = (1..=10)
            .map(|i| failed(i, &format!("SELECT amount FROM loan WHERE duration = {}", i * 12), "empty result"))
            .collect();
        let four = compress_history("How many loans?", &many[..4], 2000).render();
        let ten = compress_history("How many loans?", &many, 2000).render();
        assert!(ten.chars().count() <= 2000);
        let (a, b) = (four.chars().count() as f64, ten.chars().count() as f64);
        assert!((a - b).abs() / a <= 0.05, "{a} vs {b}");
    }
}
