use std::fmt::Write;

use ledgersql_client::AskResponse;
use ledgersql_core::proto::{Mode, Verdict};
use ledgersql_core::sql::format_result;

/// Final SQL, the result table, then one line per attempt.
pub fn ask_summary(r: &AskResponse) -> String {
    let mut out = String::new();
    match &r.final_sql {
        Some(sql) => {
            let _ = writeln!(out, "SQL:\n{sql}\n");
        }
        None => out.push_str("SQL: none\n\n"),
    }
    if let Some(table) = &r.result {
        let _ = writeln!(out, "{}\n", format_result(table, usize::MAX));
    }
    if r.best_effort {
        out.push_str("best effort: no attempt was accepted\n");
    }
    let _ = writeln!(out, "attempts: {}", r.attempts.len());
    for a in &r.attempts {
        let mode = match a.mode {
            Mode::Fast => "fast",
            Mode::Slow => "slow",
        };
        let verdict = match a.verdict {
            Verdict::Accepted => "accepted",
            Verdict::Rejected => "rejected",
        };
        let _ = write!(out, "  {}. {mode} {verdict}", a.index);
        if let Some(reason) = &a.reason {
            let _ = write!(out, ": {reason}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "trace: {}", r.trace_id);
    out
}
