//! The agent-facing tool surface: `schema_search(query, k)` and
//! `sql_execute(sql, row_limit)` over a line-delimited JSON protocol.
//!
//! Each request is one line:
//!
//! ```text
//! {"id": 1, "tool": "sql_execute", "args": {"sql": "SELECT 1", "row_limit": 5}}
//! ```
//!
//! and gets exactly one response line, `{"id": 1, "ok": true, "result": ...}`
//! or `{"id": 1, "ok": false, "error": {"code": ..., "message": ...}}`.

use std::io::{BufRead, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::llm::Embedder;
use crate::proto::{CandidateSql, ExecErrorKind, SqlOrigin};
use crate::retrieval::{retrieve, SchemaIndex};
use crate::sql::{execute, format_result, Database, ExecOptions};

pub const TOOL_NAMES: [&str; 2] = ["schema_search", "sql_execute"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolRequest {
    #[serde(default)]
    pub id: Value,
    pub tool: String,
    #[serde(default)]
    pub args: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolFault {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResponse {
    pub id: Value,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ToolFault>,
}

impl ToolResponse {
    fn success(id: Value, result: Value) -> Self {
        Self {
            id,
            ok: true,
            result: Some(result),
            error: None,
        }
    }

    fn failure(id: Value, code: &str, message: impl Into<String>) -> Self {
        Self {
            id,
            ok: false,
            result: None,
            error: Some(ToolFault {
                code: code.to_string(),
                message: message.into(),
            }),
        }
    }
}

pub struct ToolServer<'a> {
    pub index: &'a SchemaIndex,
    pub embedder: &'a dyn Embedder,
    pub db: &'a Database,
    pub dialect: String,
    pub default_row_limit: u64,
    pub timeout: Duration,
    pub render_cap_chars: usize,
}

impl ToolServer<'_> {
    pub fn describe(&self) -> Value {
        json!([
            {"name": "schema_search", "description": "Top-k schema columns matching a query",
             "parameters": {"query": "string", "k": "positive integer, default 10"}},
            {"name": "sql_execute", "description": "Run one read-only SQL query with a row limit",
             "parameters": {"sql": "string", "row_limit": format!("positive integer, default {}", self.default_row_limit)}}
        ])
    }

    pub fn handle(&self, request: &ToolRequest) -> ToolResponse {
        let id = request.id.clone();
        match request.tool.as_str() {
            "list_tools" => ToolResponse::success(id, self.describe()),
            "schema_search" => {
                let Some(query) = request.args.get("query").and_then(Value::as_str).filter(|q| !q.trim().is_empty()) else {
                    return ToolResponse::failure(id, "invalid_args", "query must be a non-empty string");
                };
                let k = request.args.get("k").and_then(Value::as_u64).unwrap_or(crate::retrieval::DEFAULT_TOP_K as u64) as usize;
                match retrieve(self.index, &[query.to_string()], k, self.embedder) {
                    Ok(hits) => {
                        let columns: Vec<Value> = hits
                            .iter()
                            .map(|h| {
                                let text = self
                                    .index
                                    .documents
                                    .iter()
                                    .find(|d| d.table == h.table && d.column == h.column)
                                    .map(|d| d.text.as_str())
                                    .unwrap_or("");
                                json!({"table": h.table, "column": h.column, "score": h.score, "text": text})
                            })
                            .collect();
                        ToolResponse::success(id, json!({ "columns": columns }))
                    }
                    Err(e) => ToolResponse::failure(id, "search_failed", e.to_string()),
                }
            }
            "sql_execute" => {
                let Some(sql) = request.args.get("sql").and_then(Value::as_str).filter(|s| !s.trim().is_empty()) else {
                    return ToolResponse::failure(id, "invalid_args", "sql must be a non-empty string");
                };
                let row_limit = request.args.get("row_limit").and_then(Value::as_u64).unwrap_or(self.default_row_limit);
                if row_limit == 0 {
                    return ToolResponse::failure(id, "invalid_args", "row_limit must be positive");
                }
                let candidate = CandidateSql {
                    sql_text: sql.to_string(),
                    dialect: self.dialect.clone(),
                    origin: SqlOrigin::OrchestratorEmit,
                };
                match execute(self.db, &candidate, &ExecOptions::new(row_limit, self.timeout)) {
                    Ok(table) => {
                        let text = format_result(&table, self.render_cap_chars);
                        ToolResponse::success(id, json!({ "table": table, "text": text }))
                    }
                    Err(e) => {
                        let code = match e.kind {
                            ExecErrorKind::GuardrailViolation => "guardrail_denied",
                            ExecErrorKind::Timeout => "timeout",
                            ExecErrorKind::Execution => "execution_error",
                        };
                        ToolResponse::failure(id, code, e.message)
                    }
                }
            }
            other => ToolResponse::failure(id, "unknown_tool", format!("unknown tool {other:?}")),
        }
    }

    /// Serves requests until `input` ends. Returns the number of requests handled.
    pub fn serve(&self, input: impl BufRead, mut output: impl Write) -> std::io::Result<usize> {
        let mut handled = 0;
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let response = match serde_json::from_str::<ToolRequest>(&line) {
                Ok(req) => self.handle(&req),
                Err(e) => ToolResponse::failure(Value::Null, "malformed_request", e.to_string()),
            };
            serde_json::to_writer(&mut output, &response)?;
            output.write_all(b"\n")?;
            output.flush()?;
            handled += 1;
        }
        Ok(handled)
    }
}
