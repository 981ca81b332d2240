use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ledgersql_client::{AskRequest, Client, ClientError};
use ledgersql_core::config::{EngineConfig, Providers};
use ledgersql_core::eval::ArtifactStore;
use ledgersql_core::llm::{HashEmbedder, ProviderHandle, ScriptedProvider};
use ledgersql_core::proto::{ExecutionOutcome, Mode, Scalar, TraceEvent, Verdict};
use ledgersql_core::retrieval::build_index;
use ledgersql_core::schema::{enrich_database, save_metadata, DescribeOptions};
use ledgersql_core::sql::Database;
use ledgersql_server::{serve_on, AppState};
use ledgersql_testkit::{file_sha256, write_answer_db, ANSWER_ESCALATION_SCRIPT, ANSWER_SCRIPT};
use tempfile::TempDir;

struct Service {
    _dir: TempDir,
    db_path: PathBuf,
    client: Client,
    base: String,
}

fn scripted(script: &str) -> ProviderHandle {
    Arc::new(ScriptedProvider::from_script(script).unwrap())
}

/// Enriches the answer database into `data` the way `ledgersql enrich` does.
fn write_data_dir(data: &Path) -> PathBuf {
    std::fs::create_dir_all(data).unwrap();
    let db_path = data.join("answer.sqlite");
    write_answer_db(&db_path);
    let db = Database::open_read_only(&db_path).unwrap();
    let schema = enrich_database(&db, "answer", &scripted(ANSWER_SCRIPT), None, &DescribeOptions::default()).unwrap();
    let index = build_index(&schema, &HashEmbedder::default()).unwrap();
    let store = ArtifactStore::new(data);
    save_metadata(&schema, &store.metadata_path("answer")).unwrap();
    index.save(&store.index_path("answer")).unwrap();
    db_path
}

async fn start(script: &str, retention: usize) -> Service {
    let dir = tempfile::tempdir().unwrap();
    let db_path = write_data_dir(&dir.path().join("data"));
    let mut config = EngineConfig::default();
    config.server.data_dir = dir.path().join("data");
    config.server.trace_dir = dir.path().join("traces");
    config.server.trace_retention = retention;
    let providers = Providers::uniform(scripted(script), Arc::new(HashEmbedder::default()));
    let state = Arc::new(AppState::from_config(&config, providers).unwrap());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(serve_on(listener, state));
    Service {
        _dir: dir,
        db_path,
        client: Client::new(&base).unwrap(),
        base,
    }
}

#[tokio::test]
async fn health_and_listing() {
    let s = start(ANSWER_SCRIPT, 10).await;
    let h = s.client.health().await.unwrap();
    assert_eq!((h.status.as_str(), h.version.as_str()), ("ok", env!("CARGO_PKG_VERSION")));
    let dbs = s.client.databases().await.unwrap();
    assert_eq!(dbs.len(), 1);
    assert_eq!((dbs[0].id.as_str(), dbs[0].tables, dbs[0].columns), ("answer", 1, 2));
}

#[tokio::test]
async fn ask_answers_and_trace_matches() {
    let s = start(ANSWER_SCRIPT, 10).await;
    let r = s.client.ask("answer", &AskRequest::new("What is the answer?")).await.unwrap();
    assert!(!r.best_effort);
    assert_eq!(r.final_sql.as_deref(), Some("SELECT value FROM answer"));
    let table = r.result.unwrap();
    assert_eq!(table.column_names, ["value"]);
    assert_eq!(table.rows, vec![vec![Scalar::Integer(42)]]);

    let trace = s.client.trace(&r.trace_id).await.unwrap();
    assert_eq!(trace.header.trace_id, r.trace_id);
    assert_eq!(trace.attempts().count(), r.attempts.len());
    assert!(matches!(trace.events.last(), Some(TraceEvent::SessionFinished { attempts: 1, .. })));
}

#[tokio::test]
async fn escalated_session_trace_lists_attempts_in_order() {
    let s = start(ANSWER_ESCALATION_SCRIPT, 10).await;
    let r = s.client.ask("answer", &AskRequest::new("What is the answer?")).await.unwrap();
    let modes: Vec<Mode> = r.attempts.iter().map(|a| a.mode).collect();
    assert_eq!(modes, [Mode::Fast, Mode::Fast, Mode::Slow]);
    let trace = s.client.trace(&r.trace_id).await.unwrap();
    let traced: Vec<(usize, Mode)> = trace.attempts().map(|a| (a.index, a.mode)).collect();
    assert_eq!(traced, [(1, Mode::Fast), (2, Mode::Fast), (3, Mode::Slow)]);
}

#[tokio::test]
async fn validation_and_lookup_errors_are_structured() {
    let s = start(ANSWER_SCRIPT, 10).await;
    for q in ["", "   "] {
        let e = s.client.ask("answer", &AskRequest::new(q)).await.unwrap_err();
        assert_eq!(e.code(), Some("validation"), "{e}");
        assert!(matches!(&e, ClientError::Api { status, .. } if status.as_u16() == 400));
    }
    let e = s.client.ask("nope", &AskRequest::new("q")).await.unwrap_err();
    assert!(matches!(&e, ClientError::Api { status, .. } if status.as_u16() == 404));
    assert_eq!(e.code(), Some("unknown_database"));
    for id in ["missing", "..%2F..%2Fetc"] {
        let e = s.client.trace(id).await.unwrap_err();
        assert_eq!(e.code(), Some("unknown_trace"), "{id}");
    }
    let overrides = serde_json::json!({"question": "q", "overrides": {"total_budget": 0}});
    let raw = reqwest::Client::new().post(format!("{}/v1/databases/answer/ask", s.base)).json(&overrides).send().await.unwrap();
    assert_eq!(raw.status().as_u16(), 400);

    let raw = reqwest::Client::new()
        .post(format!("{}/v1/databases/answer/ask", s.base))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(raw.status().as_u16(), 400);
    let body: serde_json::Value = raw.json().await.unwrap();
    assert_eq!(body["error"]["code"], "validation");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_asks_get_unique_retrievable_traces() {
    let s = start(ANSWER_SCRIPT, 1000).await;
    let asks = (0..100).map(|i| {
        let client = s.client.clone();
        async move { client.ask("answer", &AskRequest::new(format!("What is the answer, take {i}?"))).await }
    });
    let responses = futures::future::join_all(asks).await;
    let ids: HashSet<String> = responses.into_iter().map(|r| r.unwrap().trace_id).collect();
    assert_eq!(ids.len(), 100);
    for id in ids.iter().take(10) {
        assert!(s.client.trace(id).await.is_ok());
    }
}

#[tokio::test]
async fn denied_statements_never_reach_the_database() {
    let script = r#">>>* [DESCRIBE]
{"table": "", "columns": {}}
>>>* [FACT_SHEET]
{"required_tables": ["answer"]}
>>>* [DECIDE]
EMIT
>>>* [EMIT]
```sql
DELETE FROM answer
```
>>>* [GENERATE]
```sql
WITH x AS (SELECT 1) UPDATE answer SET value = 0
```
"#;
    let s = start(script, 10).await;
    let before = file_sha256(&s.db_path);
    let r = s.client.ask("answer", &AskRequest::new("Clear the answers")).await.unwrap();
    assert_eq!(r.attempts.len(), 4);
    assert!(r.attempts.iter().all(|a| a.verdict == Verdict::Rejected));
    assert!(r.best_effort);
    assert_eq!(r.final_sql, None);
    assert_eq!(file_sha256(&s.db_path), before);
    let trace = s.client.trace(&r.trace_id).await.unwrap();
    for a in trace.attempts() {
        assert!(!a.guardrail_allowed());
        assert_eq!(a.execution, ExecutionOutcome::NotRun);
    }
}

#[tokio::test]
async fn engine_failure_keeps_partial_trace() {
    let script = ">>>* [DESCRIBE]\n{\"table\": \"\", \"columns\": {}}\n>>>* *\n!transport connection reset\n";
    let s = start(script, 10).await;
    let e = s.client.ask("answer", &AskRequest::new("What is the answer?")).await.unwrap_err();
    let ClientError::Api { status, body } = e else { panic!("{e:?}") };
    assert_eq!((status.as_u16(), body.error.code.as_str()), (502, "engine_failure"));
    let trace_id = body.error.trace_id.expect("partial trace id");
    let trace = s.client.trace(&trace_id).await.unwrap();
    assert_eq!(trace.header.trace_id, trace_id);
}

#[tokio::test]
async fn retention_evicts_oldest_trace() {
    let s = start(ANSWER_SCRIPT, 2).await;
    let mut ids = Vec::new();
    for _ in 0..3 {
        ids.push(s.client.ask("answer", &AskRequest::new("What is the answer?")).await.unwrap().trace_id);
    }
    assert_eq!(s.client.trace(&ids[0]).await.unwrap_err().code(), Some("unknown_trace"));
    assert!(s.client.trace(&ids[2]).await.is_ok());
}
