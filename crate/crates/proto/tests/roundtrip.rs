use ledgersql_proto::{
    AskResponse, AttemptRecord, AttemptSummary, CandidateSql, ExecutionOutcome, Mode, ParseOutcome, ResultTable, Scalar,
    SessionTrace, SqlOrigin, TraceEvent, TraceHeader, Verdict,
};
use proptest::prelude::*;

fn scalar() -> impl Strategy<Value = Scalar> {
    prop_oneof![
        Just(Scalar::Null),
        any::<i64>().prop_map(Scalar::Integer),
        // SQLite never yields NaN or infinities
        (-1e300f64..1e300).prop_map(Scalar::Real),
        ".{0,12}".prop_map(Scalar::Text),
        prop::collection::vec(any::<u8>(), 0..8).prop_map(Scalar::Blob),
    ]
}

fn table() -> impl Strategy<Value = ResultTable> {
    (1usize..4).prop_flat_map(|w| {
        (
            prop::collection::vec("[a-z_]{1,8}", w),
            prop::collection::vec(prop::collection::vec(scalar(), w), 0..6),
        )
            .prop_map(|(cols, rows)| ResultTable::new(cols, rows))
    })
}

fn attempt(index: usize, t: ResultTable) -> AttemptRecord {
    AttemptRecord {
        index,
        mode: Mode::Fast,
        sql: Some(CandidateSql {
            sql_text: "SELECT 1".into(),
            dialect: "sqlite".into(),
            origin: SqlOrigin::OrchestratorEmit,
        }),
        validation: Some(ParseOutcome::Ok),
        guardrail: None,
        execution: ExecutionOutcome::Table { table: t },
        heuristics: None,
        verdict: Verdict::Accepted,
        rejection_reason: None,
        emptiness_affirmed: false,
    }
}

proptest! {
    #[test]
    fn result_table_json_round_trip(t in table()) {
        let text = serde_json::to_string(&t).unwrap();
        prop_assert_eq!(serde_json::from_str::<ResultTable>(&text).unwrap(), t);
    }

    #[test]
    fn ask_response_round_trip(t in proptest::option::of(table()), best_effort in any::<bool>(), latency_ms in any::<u32>()) {
        let r = AskResponse {
            api_version: "v1".into(),
            database_id: "financial".into(),
            final_sql: t.as_ref().map(|_| "SELECT 1".to_string()),
            result: t,
            best_effort,
            attempts: vec![AttemptSummary { index: 1, mode: Mode::Slow, sql: None, verdict: Verdict::Rejected, reason: Some("x".into()) }],
            latency_ms: u64::from(latency_ms),
            trace_id: "t".into(),
        };
        let text = serde_json::to_string(&r).unwrap();
        prop_assert_eq!(serde_json::from_str::<AskResponse>(&text).unwrap(), r);
    }

    #[test]
    fn trace_jsonl_round_trip(tables in prop::collection::vec(table(), 0..4)) {
        let trace = SessionTrace {
            header: TraceHeader::new("id", "db", "q?"),
            events: tables
                .into_iter()
                .enumerate()
                .map(|(i, t)| TraceEvent::AttemptFinished { attempt: attempt(i + 1, t) })
                .collect(),
        };
        let text = trace.to_jsonl().unwrap();
        prop_assert_eq!(text.lines().count(), trace.events.len() + 1);
        prop_assert_eq!(SessionTrace::from_jsonl(&text).unwrap(), trace);
    }
}
