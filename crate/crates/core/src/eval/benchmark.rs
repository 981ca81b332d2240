use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::sql::validate_text;

pub const QUESTIONS_FILE: &str = "dev.json";

/// Published item counts of the dev split, used as a manifest check.
const MANIFEST: &[(Option<&str>, usize)] = &[
    (None, 1534),
    (Some("financial"), 106),
    (Some("european_football_2"), 129),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub item_id: String,
    pub database_id: String,
    pub question: String,
    pub evidence: Option<String>,
    pub gold_sql: String,
    /// Benchmark domain; one domain per database.
    pub domain: String,
}

#[derive(Deserialize)]
struct RawItem {
    question_id: serde_json::Value,
    db_id: String,
    question: String,
    #[serde(default)]
    evidence: Option<String>,
    #[serde(rename = "SQL")]
    sql: String,
}

pub fn expected_count(subset: Option<&str>) -> Option<usize> {
    MANIFEST.iter().find(|(d, _)| *d == subset).map(|(_, n)| *n)
}

/// `<root>/dev_databases/<db>/<db>.sqlite`
pub fn database_path(root: &Path, database_id: &str) -> PathBuf {
    root.join("dev_databases").join(database_id).join(format!("{database_id}.sqlite"))
}

fn id_text(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Reads `dev.json` and checks every referenced database file exists.
pub fn load_benchmark(root: &Path, subset: Option<&str>) -> Result<Vec<BenchmarkItem>, EvalError> {
    let path = root.join(QUESTIONS_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| EvalError::MalformedQuestionFile(format!("{}: {e}", path.display())))?;
    let raw: Vec<RawItem> =
        serde_json::from_str(&text).map_err(|e| EvalError::MalformedQuestionFile(format!("{}: {e}", path.display())))?;

    let items: Vec<BenchmarkItem> = raw
        .into_iter()
        .filter(|r| subset.is_none_or(|d| r.db_id == d))
        .map(|r| BenchmarkItem {
            item_id: id_text(&r.question_id),
            domain: r.db_id.clone(),
            database_id: r.db_id,
            question: r.question,
            evidence: r.evidence.filter(|e| !e.trim().is_empty()),
            gold_sql: r.sql,
        })
        .collect();

    if items.is_empty() {
        if let Some(d) = subset {
            tracing::warn!(domain = d, "no benchmark items for this domain");
        }
        return Ok(items);
    }

    let mut checked = BTreeMap::new();
    for item in &items {
        if checked.contains_key(&item.database_id) {
            continue;
        }
        let db = database_path(root, &item.database_id);
        if !db.is_file() {
            return Err(EvalError::MissingDatabase {
                database_id: item.database_id.clone(),
                path: db.display().to_string(),
            });
        }
        checked.insert(item.database_id.clone(), db);
    }

    for item in &items {
        if !validate_text(&item.gold_sql, "sqlite").is_ok() {
            tracing::warn!(item = %item.item_id, "gold query does not parse");
        }
    }
    if let Some(expected) = expected_count(subset) {
        if items.len() != expected {
            tracing::warn!(found = items.len(), expected, "benchmark size differs from the published dev split");
        }
    }
    Ok(items)
}

/// Gold query corrections: a JSON object mapping item id to replacement SQL.
pub fn load_overlay(path: &Path) -> Result<BTreeMap<String, String>, EvalError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| EvalError::MalformedQuestionFile(format!("{}: {e}", path.display())))
}
