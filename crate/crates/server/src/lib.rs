//! HTTP front end for the ledgersql engine.
//!
//! | method | path | body |
//! |---|---|---|
//! | `POST` | `/v1/databases/{id}/ask` | `AskRequest` → `AskResponse` |
//! | `GET` | `/v1/databases` | list of `DatabaseInfo` |
//! | `GET` | `/v1/traces/{trace_id}` | `SessionTrace` |
//! | `GET` | `/healthz` | `Health` |
//!
//! Errors are `ErrorBody` JSON with a machine-readable code.

mod registry;
mod traces;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ledgersql_core::config::{EngineConfig, Providers, SessionConfig};
use ledgersql_core::orchestrator::{attempt_summary, run_session, SessionRequest};
use ledgersql_core::proto::{AskRequest, AskResponse, DatabaseInfo, ErrorBody, Health, SessionTrace, API_VERSION};
use ledgersql_core::sql::Database;
use thiserror::Error;

pub use registry::{DatabaseEntry, Registry};
pub use traces::{valid_trace_id, TraceStore};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot read {path}: {source}")]
    DataDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("trace store: {0}")]
    Trace(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A request failure as seen by the client.
#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    Validation(String),
    #[error("unknown database {0:?}")]
    UnknownDatabase(String),
    #[error("unknown trace {0:?}")]
    UnknownTrace(String),
    #[error("engine failure: {message}")]
    Engine { message: String, trace_id: Option<String> },
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Validation(_) => StatusCode::BAD_REQUEST,
            ApiError::UnknownDatabase(_) | ApiError::UnknownTrace(_) => StatusCode::NOT_FOUND,
            ApiError::Engine { .. } => StatusCode::BAD_GATEWAY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Validation(_) => "validation",
            ApiError::UnknownDatabase(_) => "unknown_database",
            ApiError::UnknownTrace(_) => "unknown_trace",
            ApiError::Engine { .. } => "engine_failure",
            ApiError::Internal(_) => "internal",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = ErrorBody::new(self.code(), self.to_string());
        if let ApiError::Engine { trace_id, .. } = &self {
            body.error.trace_id = trace_id.clone();
        }
        (self.status(), Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::Validation(r.body_text())
    }
}

pub struct AppState {
    pub registry: Registry,
    pub traces: TraceStore,
    pub session: SessionConfig,
    pub providers: Providers,
}

impl AppState {
    /// Loads the registry from `config.server.data_dir` and opens the trace store.
    pub fn from_config(config: &EngineConfig, providers: Providers) -> Result<Self, ServerError> {
        Ok(Self {
            registry: Registry::load(&config.server.data_dir)?,
            traces: TraceStore::open(&config.server.trace_dir, config.server.trace_retention)?,
            session: config.session.clone(),
            providers,
        })
    }
}

pub type SharedState = Arc<AppState>;

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/healthz", get(health))
        .route("/v1/databases", get(list_databases))
        .route("/v1/databases/{id}/ask", post(ask))
        .route("/v1/traces/{trace_id}", get(get_trace))
        .with_state(state)
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".to_string(),
        version: VERSION.to_string(),
    })
}

async fn list_databases(State(state): State<SharedState>) -> Json<Vec<DatabaseInfo>> {
    Json(state.registry.list())
}

async fn get_trace(State(state): State<SharedState>, Path(trace_id): Path<String>) -> Result<Json<SessionTrace>, ApiError> {
    let store = state.clone();
    let id = trace_id.clone();
    let found = tokio::task::spawn_blocking(move || store.traces.get(&id))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    found.map(Json).ok_or(ApiError::UnknownTrace(trace_id))
}

async fn ask(
    State(state): State<SharedState>,
    Path(database_id): Path<String>,
    body: Result<Json<AskRequest>, JsonRejection>,
) -> Result<Json<AskResponse>, ApiError> {
    let Json(request) = body?;
    if request.question.trim().is_empty() {
        return Err(ApiError::Validation("question must not be empty".into()));
    }
    let entry = state.registry.get(&database_id).ok_or_else(|| ApiError::UnknownDatabase(database_id.clone()))?;
    let config = state.session.with_overrides(&request.overrides);
    config.validate().map_err(|e| ApiError::Validation(e.to_string()))?;
    tokio::task::spawn_blocking(move || answer(&state, &entry, &config, request))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map(Json)
}

/// Runs one session synchronously with its own connection and trace file.
pub fn answer(state: &AppState, entry: &DatabaseEntry, config: &SessionConfig, request: AskRequest) -> Result<AskResponse, ApiError> {
    let start = Instant::now();
    let trace_id = uuid::Uuid::new_v4().to_string();
    let db = Database::open_read_only(&entry.db_path).map_err(|e| ApiError::Internal(format!("cannot open database: {}", e.message)))?;
    let mut sink = state.traces.create(&trace_id).map_err(|e| ApiError::Internal(format!("cannot create trace: {e}")))?;
    let session = SessionRequest {
        question: request.question,
        business_rules: request.business_rules,
        few_shot: request.few_shot,
        trace_id: Some(trace_id.clone()),
    };
    let result = run_session(&session, &entry.schema, &entry.index, config, &state.providers, &db, &mut sink);
    drop(sink);
    state.traces.finish(&trace_id);
    let session_state = result.map_err(|e| {
        tracing::warn!(%trace_id, error = %e, "session failed");
        ApiError::Engine {
            message: e.to_string(),
            trace_id: Some(trace_id.clone()),
        }
    })?;
    let outcome = session_state
        .outcome
        .clone()
        .ok_or_else(|| ApiError::Internal("session ended without an outcome".into()))?;
    Ok(AskResponse {
        api_version: API_VERSION.to_string(),
        database_id: entry.schema.database_id.clone(),
        final_sql: outcome.final_sql,
        result: outcome.result,
        best_effort: outcome.best_effort,
        attempts: session_state.attempts.iter().map(attempt_summary).collect(),
        latency_ms: start.elapsed().as_millis() as u64,
        trace_id,
    })
}

/// Serves on an already bound listener until the task is dropped or the
/// process receives Ctrl-C.
pub async fn serve_on(listener: tokio::net::TcpListener, state: SharedState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Loads everything described by `config` and serves on `config.server.bind`.
pub async fn serve(config: EngineConfig) -> Result<(), ServerError> {
    let providers = Providers::from_config(&config.providers).map_err(|e| ServerError::Config(e.to_string()))?;
    let state = Arc::new(AppState::from_config(&config, providers)?);
    if state.registry.is_empty() {
        tracing::warn!(data_dir = %config.server.data_dir.display(), "no enriched databases found");
    }
    let addr: SocketAddr = config
        .server
        .bind
        .parse()
        .map_err(|_| ServerError::Config(format!("bind address {:?}", config.server.bind)))?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServerError::Bind {
        addr: config.server.bind.clone(),
        source,
    })?;
    tracing::info!(%addr, databases = state.registry.len(), "listening");
    serve_on(listener, state.clone()).await?;
    // a blocking HTTP client must not be dropped on a runtime thread
    let _ = tokio::task::spawn_blocking(move || drop(state)).await;
    Ok(())
}
