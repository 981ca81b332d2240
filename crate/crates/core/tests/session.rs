mod common;

use std::path::PathBuf;

use ledgersql_core::config::SessionConfig;
use ledgersql_core::orchestrator::{
    compress_history, run_session, JsonlTraceWriter, SessionRequest, SessionState, EMIT_MARKER,
};
use ledgersql_core::proto::{Action, Mode, SessionTrace, TraceEvent};
use proptest::prelude::*;

use common::session::{build_script, fenced, Reply, Script, GOOD, QUESTION};

thread_local! {
    static FIXTURE: common::Fixture = common::financial();
}

fn run(script: &Script, config: &SessionConfig) -> (SessionState, SessionTrace, Vec<ledgersql_core::llm::ChatRequest>) {
    FIXTURE.with(|f| common::session::run(f, script, config))
}

#[test]
fn happy_path_takes_three_calls() {
    let script = Script::new().add("[DECIDE]", "EMIT").add("[EMIT]", &fenced(GOOD));
    let (state, trace, requests) = run(&script, &SessionConfig::default());
    assert_eq!(requests.len(), 3);
    assert_eq!(state.attempts.len(), 1);
    let outcome = state.outcome.unwrap();
    assert!(!outcome.best_effort);
    assert_eq!(outcome.final_sql.as_deref(), Some(GOOD));
    assert_eq!(outcome.result.unwrap().row_count, 1);
    assert_eq!(state.turns, 2);
    assert_eq!(trace.attempts().count(), 1);
    // schema fits the budget, so no search tool call
    assert_eq!(trace.tool_calls(), ["sql_execute", "sql_execute"]);
}

#[test]
fn two_failures_escalate_to_the_generator() {
    let script = Script::new()
        .add("[DECIDE]", "EMIT")
        .add("[EMIT]", &fenced("SELECT COUNT(*) FROM accounts"))
        .add("[DECIDE]", "EMIT")
        .add("[EMIT]", &fenced("SELECT COUNT(*) FROM account WHERE opened = 1997"))
        .add("[GENERATE]", &fenced(GOOD));
    let (state, trace, requests) = run(&script, &SessionConfig::default());
    let modes: Vec<Mode> = state.attempts.iter().map(|a| a.mode).collect();
    assert_eq!(modes, [Mode::Fast, Mode::Fast, Mode::Slow]);
    assert!(state.attempts[2].accepted());
    assert!(!state.outcome.as_ref().unwrap().best_effort);
    let forced: Vec<(Action, bool)> = trace
        .events
        .iter()
        .filter_map(|e| match e {
            TraceEvent::DecisionMade { action, forced, .. } => Some((*action, *forced)),
            _ => None,
        })
        .collect();
    assert_eq!(
        forced,
        [(Action::Emit, false), (Action::Emit, false), (Action::DelegateGenerate, true), (Action::Finalize, true)]
    );
    let generate = requests.iter().find(|r| r.transcript().contains("[GENERATE]")).unwrap();
    let user = &generate.messages.last().unwrap().content;
    assert!(user.trim_end().ends_with(QUESTION));
    assert!(user.contains("accounts"), "compressed history mentions the failed attempt");
}

#[test]
fn exhausted_budget_returns_best_effort() {
    let script = Script::new()
        .add("[DECIDE]", "EMIT")
        .add("[EMIT]", &fenced("SELECT account_id FROM account WHERE date LIKE '1897%'"))
        .add("[REFLECT]", "NO")
        .add("[DECIDE]", "EMIT")
        .add("[EMIT]", "I am not sure.")
        .add("[GENERATE]", &fenced("SELEC nonsense"))
        .add("[GENERATE]", &fenced("DELETE FROM account"));
    let (state, _, _) = run(&script, &SessionConfig::default());
    assert_eq!(state.attempts.len(), 4);
    let outcome = state.outcome.unwrap();
    assert!(outcome.best_effort);
    // the empty-but-valid first attempt outranks prose, bad syntax and a denied write
    assert_eq!(outcome.chosen_attempt, Some(1));
    assert_eq!(outcome.result.unwrap().row_count, 0);
}

#[test]
fn probe_runs_before_emitting() {
    let script = Script::new()
        .add("[DECIDE]", "EXECUTE")
        .add("[PROBE]", &fenced("SELECT DISTINCT STRFTIME('%Y', date) FROM account"))
        .add("[DECIDE]", "EMIT")
        .add("[EMIT]", &fenced(GOOD));
    let (state, trace, requests) = run(&script, &SessionConfig::default());
    assert_eq!(state.probes_used, 1);
    assert_eq!(state.attempts.len(), 1);
    assert!(trace.events.iter().any(|e| matches!(e, TraceEvent::ProbeFinished { .. })));
    let emit = requests.iter().find(|r| r.transcript().contains(EMIT_MARKER)).unwrap();
    assert!(emit.transcript().contains("Probe 1 SQL"));
}

#[test]
fn compression_is_bounded_and_count_independent() {
    let mut script = Script::new();
    for i in 0..10 {
        script = script.add("[DECIDE]", "EMIT").add("[EMIT]", &fenced(&format!("SELECT missing_{i} FROM account")));
        script = script.add("[GENERATE]", &fenced(&format!("SELECT nothing_{i} FROM loan")));
    }
    let config = SessionConfig {
        total_budget: 10,
        escalation_threshold: 100,
        ..SessionConfig::default()
    };
    let (state, _, _) = run(&script, &config);
    assert_eq!(state.attempts.len(), 10);
    let cap = 2000;
    let four = compress_history(QUESTION, &state.attempts[..4], cap).render().chars().count();
    let ten = compress_history(QUESTION, &state.attempts, cap).render().chars().count();
    assert!(ten <= cap);
    assert!((ten as f64 - four as f64).abs() <= 0.05 * four as f64, "{four} vs {ten}");
}

fn reply_strategy() -> impl Strategy<Value = Reply> {
    prop_oneof![
        1 => Just(Reply::Good),
        2 => Just(Reply::Syntax),
        2 => Just(Reply::MissingTable),
        1 => Just(Reply::Write),
        1 => Just(Reply::Prose),
        2 => any::<bool>().prop_map(|affirm| Reply::Empty { affirm }),
    ]
}

fn decide_strategy() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("EMIT"), Just("GENERATE"), Just("EXECUTE"), Just("FINALIZE"), Just("hmm")]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn state_machine_invariants(
        decides in prop::collection::vec(decide_strategy(), 12),
        emits in prop::collection::vec(reply_strategy(), 6),
        generates in prop::collection::vec(reply_strategy(), 6),
    ) {
        let script = build_script(&decides, &emits, &generates);
        let config = SessionConfig::default();
        let (state, trace, requests) = run(&script, &config);

        if let Err(e) = common::session::check_invariants(&state, &trace, &requests) {
            return Err(TestCaseError::fail(e));
        }
    }
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/escalation_trace.jsonl")
}

#[test]
fn escalation_trace_matches_golden_file() {
    let script = Script::new()
        .add("[DECIDE]", "EMIT")
        .add("[EMIT]", &fenced("SELECT COUNT(*) FROM accounts"))
        .add("[DECIDE]", "GENERATE")
        .add("[EMIT]", "Let me think about it.")
        .add("[GENERATE]", &fenced(GOOD));
    let text = FIXTURE.with(|f| {
        let (providers, _) = common::providers(&script.0);
        let mut writer = JsonlTraceWriter::new(Vec::new());
        let mut req = SessionRequest::new(QUESTION);
        req.trace_id = Some("golden".into());
        run_session(&req, &f.schema, &f.index, &SessionConfig::default(), &providers, &f.db, &mut writer).unwrap();
        String::from_utf8(writer.into_inner()).unwrap()
    });
    let path = golden_path();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &text).unwrap();
    }
    let expected = std::fs::read_to_string(&path).expect("golden trace present (UPDATE_GOLDEN=1 regenerates it)");
    assert_eq!(text, expected);
    let parsed = SessionTrace::from_jsonl(&text).unwrap();
    let modes: Vec<Mode> = parsed.attempts().map(|a| a.mode).collect();
    assert_eq!(modes, [Mode::Fast, Mode::Fast, Mode::Slow]);
}
