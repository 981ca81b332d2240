//! The client against a stub server: URL layout and error decoding.

use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use ledgersql_client::{AskRequest, AskResponse, Client, ClientError, ErrorBody, Health};

async fn stub() -> String {
    let app = Router::new()
        .route("/base/healthz", get(|| async { Json(Health { status: "ok".into(), version: "9".into() }) }))
        .route(
            "/base/v1/databases/{id}/ask",
            post(|axum::extract::Path(id): axum::extract::Path<String>, Json(req): Json<AskRequest>| async move {
                if req.question.is_empty() {
                    return Err((StatusCode::BAD_REQUEST, Json(ErrorBody::new("validation", "empty"))));
                }
                Ok(Json(AskResponse {
                    api_version: "v1".into(),
                    database_id: id,
                    final_sql: Some("SELECT 42".into()),
                    result: None,
                    best_effort: false,
                    attempts: vec![],
                    latency_ms: 1,
                    trace_id: "t".into(),
                }))
            }),
        )
        .route("/base/v1/traces/{id}", get(|| async { (StatusCode::INTERNAL_SERVER_ERROR, "boom") }));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}/base")
}

#[tokio::test]
async fn paths_and_errors() {
    let client = Client::new(&stub().await).unwrap();
    assert_eq!(client.health().await.unwrap().version, "9");

    let ok = client.ask("my db", &AskRequest::new("q")).await.unwrap();
    assert_eq!(ok.database_id, "my db");

    let err = client.ask("x", &AskRequest::new("")).await.unwrap_err();
    assert_eq!(err.code(), Some("validation"));
    assert!(matches!(err, ClientError::Api { status: StatusCode::BAD_REQUEST, .. }));

    match client.trace("t").await.unwrap_err() {
        ClientError::UnexpectedStatus { status, text } => assert_eq!((status.as_u16(), text.as_str()), (500, "boom")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn rejects_bad_urls() {
    assert!(matches!(Client::new("not a url"), Err(ClientError::InvalidUrl(_))));
    assert!(matches!(Client::new("mailto:x@y"), Err(ClientError::InvalidUrl(_))));
}
