use ledgersql_core::config::SessionConfig;
use ledgersql_core::eval::JUDGE_MARKER;
use ledgersql_core::llm::{ChatRequest, Role};
use ledgersql_core::orchestrator::{run_session, SessionRequest, SessionState, DECIDE_MARKER, EMIT_MARKER, PROBE_MARKER};
use ledgersql_core::proto::{Mode, SessionTrace, TraceEvent, TraceHeader};

use super::Fixture;

pub const QUESTION: &str = "How many accounts were opened in 1997?";
pub const GOOD: &str = "SELECT COUNT(account_id) FROM account WHERE STRFTIME('%Y', date) = '1997'";
pub const FACT: &str = r#"{"required_tables": ["account"], "filters": ["STRFTIME('%Y', account.date) = '1997'"]}"#;

pub fn fenced(sql: &str) -> String {
    format!("```sql\n{sql}\n```")
}

pub struct Script(pub String);

impl Script {
    pub fn new() -> Self {
        Script(format!(">>> [FACT_SHEET]\n{FACT}\n"))
    }

    pub fn add(mut self, marker: &str, reply: &str) -> Self {
        self.0.push_str(&format!(">>> {marker}\n{reply}\n"));
        self
    }
}

pub fn run(f: &Fixture, script: &Script, config: &SessionConfig) -> (SessionState, SessionTrace, Vec<ChatRequest>) {
    let (providers, rec) = super::providers(&script.0);
    let mut trace = SessionTrace {
        header: TraceHeader::new("", "", ""),
        events: Vec::new(),
    };
    let mut req = SessionRequest::new(QUESTION);
    req.trace_id = Some("trace-fixed".into());
    let state = run_session(&req, &f.schema, &f.index, config, &providers, &f.db, &mut trace).expect("session runs");
    (state, trace, rec.requests())
}

#[derive(Debug, Clone)]
pub enum Reply {
    Good,
    Syntax,
    MissingTable,
    Write,
    Prose,
    Empty { affirm: bool },
}

pub fn reply_text(r: &Reply, i: usize) -> (String, Option<&'static str>) {
    match r {
        Reply::Good => (fenced(GOOD), None),
        Reply::Syntax => (fenced(&format!("SELEC {i} FROM")), None),
        Reply::MissingTable => (fenced(&format!("SELECT * FROM nowhere_{i}")), None),
        Reply::Write => (fenced("UPDATE account SET frequency = 'x'"), None),
        Reply::Prose => ("No query today.".into(), None),
        Reply::Empty { affirm } => (
            fenced(&format!("SELECT account_id FROM account WHERE account_id < -{i}")),
            Some(if *affirm { "YES" } else { "NO" }),
        ),
    }
}

pub fn build_script(decides: &[&str], emits: &[Reply], generates: &[Reply]) -> Script {
    let mut s = Script::new();
    for d in decides {
        s = s.add("[DECIDE]", d);
    }
    for _ in 0..4 {
        s = s.add("[PROBE]", &fenced("SELECT COUNT(*) FROM account"));
    }
    for (i, r) in emits.iter().enumerate() {
        let (text, reflect) = reply_text(r, i);
        s = s.add("[EMIT]", &text);
        if let Some(answer) = reflect {
            s = s.add("[REFLECT]", answer);
        }
    }
    for (i, r) in generates.iter().enumerate() {
        let (text, reflect) = reply_text(r, 100 + i);
        s = s.add("[GENERATE]", &text);
        if let Some(answer) = reflect {
            s = s.add("[REFLECT]", answer);
        }
    }
    s
}


macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

/// Budget, best-effort, escalation and prompt-layout invariants of one
/// finished session under the default configuration.
pub fn check_invariants(state: &SessionState, trace: &SessionTrace, requests: &[ChatRequest]) -> Result<(), String> {
    ensure!(state.attempts.len() <= 4, "{} attempts", state.attempts.len());
    let outcome = state.outcome.as_ref().ok_or("no outcome")?;
    if !state.attempts.iter().any(|a| a.accepted()) {
        ensure!(outcome.best_effort, "nothing accepted but not best effort");
    }
    if state.latest_accepted() {
        ensure!(!outcome.best_effort, "accepted answer flagged best effort");
    }

    // slow mode begins exactly after two consecutive fast failures
    let first_slow = state.attempts.iter().position(|a| a.mode == Mode::Slow);
    let mut run_of_failures = 0;
    for (i, a) in state.attempts.iter().enumerate() {
        if Some(i) == first_slow {
            ensure!(run_of_failures == 2, "escalated after {run_of_failures} failures");
        } else if first_slow.is_none_or(|s| i < s) {
            ensure!(run_of_failures < 2, "no escalation after {run_of_failures} failures");
        }
        run_of_failures = if a.accepted() { 0 } else { run_of_failures + 1 };
    }
    let changes = trace.events.iter().filter(|e| matches!(e, TraceEvent::ModeChanged { .. })).count();
    ensure!(changes == usize::from(first_slow.is_some()), "{changes} mode changes");

    // fast-loop prompts: fact sheet right after the system message, question last
    for r in requests {
        if [DECIDE_MARKER, EMIT_MARKER, PROBE_MARKER].iter().any(|m| r.messages[0].content.contains(m)) {
            ensure!(r.messages[1].content.starts_with("Fact sheet:"), "fact sheet missing");
            let last = r.messages.last().unwrap();
            ensure!(last.role == Role::User && last.content == QUESTION, "question not last");
        }
        ensure!(!r.transcript().contains(JUDGE_MARKER), "judge prompt leaked into a session");
    }
    Ok(())
}
