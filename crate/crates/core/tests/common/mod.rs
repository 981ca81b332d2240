#![allow(dead_code)]

pub mod session;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use ledgersql_core::config::Providers;
use ledgersql_core::llm::{cosine, EmbedderHandle, HashEmbedder, ProviderHandle, RecordingProvider, ScriptEntry, ScriptedProvider};
use ledgersql_core::retrieval::{build_index, document_text, SchemaIndex, ScoredColumn};
use ledgersql_core::schema::{enrich_database, normalize_name, ColumnProfile, DescribeOptions, EnrichedSchema};
use ledgersql_core::sql::Database;
use ledgersql_testkit::{write_retrieval_corpus, CORPUS_COLUMNS};
use rusqlite::Connection;
use tempfile::TempDir;

pub const DESCRIBE_REPLY: &str = r#"{"table": "Banking records.", "columns": {}}"#;

pub struct Fixture {
    pub dir: TempDir,
    pub db_path: PathBuf,
    pub db: Database,
    pub schema: EnrichedSchema,
    pub index: SchemaIndex,
}

pub fn embedder() -> EmbedderHandle {
    Arc::new(HashEmbedder::default())
}

pub fn scripted(script: &str) -> ProviderHandle {
    Arc::new(ScriptedProvider::from_script(script).expect("valid script"))
}

/// Every role served by one recording scripted provider.
pub fn providers(script: &str) -> (Providers, Arc<RecordingProvider>) {
    let rec = Arc::new(RecordingProvider::new(scripted(script)));
    let handle: ProviderHandle = rec.clone();
    (Providers::uniform(handle, embedder()), rec)
}

pub fn financial() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let db_path = dir.path().join("financial.sqlite");
    ledgersql_testkit::write_financial_db(&db_path);
    let db = Database::open_read_only(&db_path).unwrap();
    let describe: ProviderHandle = Arc::new(ScriptedProvider::new(vec![ScriptEntry::sticky("[DESCRIBE]", DESCRIBE_REPLY)]).unwrap());
    let schema = enrich_database(&db, "financial", &describe, None, &DescribeOptions::default()).unwrap();
    let index = build_index(&schema, embedder().as_ref()).unwrap();
    Fixture {
        dir,
        db_path,
        db,
        schema,
        index,
    }
}

/// The retail corpus with one hand-written description per column.
pub fn corpus_schema() -> EnrichedSchema {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("retail.sqlite");
    write_retrieval_corpus(&path);
    let db = Database::open_read_only(&path).unwrap();
    let describe = scripted(">>>* [DESCRIBE]\n");
    let mut schema = enrich_database(&db, "retail", &describe, None, &DescribeOptions::default()).unwrap();
    for (t, c, d) in CORPUS_COLUMNS {
        schema.column_descriptions.get_mut(t).unwrap().insert(c.to_string(), d.to_string());
    }
    schema
}

pub fn q(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

pub fn count(conn: &Connection, sql: &str) -> u64 {
    conn.query_row(sql, [], |r| r.get::<_, i64>(0)).unwrap() as u64
}

/// Every pair of columns, tested with a plain containment query.
pub fn containment_oracle(conn: &Connection, profiles: &[ColumnProfile], declared: &BTreeSet<(String, String)>, sole_pk: &BTreeSet<(String, String)>) -> BTreeSet<String> {
    let values = |p: &ColumnProfile| -> BTreeSet<String> {
        conn.prepare(&format!("SELECT DISTINCT quote({c}) FROM {t} WHERE {c} IS NOT NULL", c = q(&p.column), t = q(&p.table)))
            .unwrap()
            .query_map([], |r| r.get::<_, String>(0))
            .unwrap()
            .map(Result::unwrap)
            .collect()
    };
    let unique = |p: &ColumnProfile| {
        let n = count(conn, &format!("SELECT COUNT(*) FROM {}", q(&p.table)));
        let nn = count(conn, &format!("SELECT COUNT({}) FROM {}", q(&p.column), q(&p.table)));
        n > 0 && nn == n && values(p).len() as u64 == n
    };
    let mut out = BTreeSet::new();
    for a in profiles {
        let key = (a.table.clone(), a.column.clone());
        if declared.contains(&key) || sole_pk.contains(&key) {
            continue;
        }
        let va = values(a);
        if va.is_empty() {
            continue;
        }
        for b in profiles {
            if (a.table == b.table && a.column == b.column) || normalize_name(&a.column) != normalize_name(&b.column) || !unique(b) {
                continue;
            }
            let vb = values(b);
            if unique(a) && va.len() == vb.len() && (a.table.as_str(), a.column.as_str()) < (b.table.as_str(), b.column.as_str()) {
                continue;
            }
            if va.is_subset(&vb) {
                out.insert(format!("{}.{}->{}.{}", a.table, a.column, b.table, b.column));
            }
        }
    }
    out
}

/// Scores every document for every entity, keeps the top k per entity and
/// each column's best score.
pub fn brute_force_retrieve(schema: &EnrichedSchema, entities: &[String], k: usize, e: &HashEmbedder) -> Vec<ScoredColumn> {
    let docs: Vec<(String, String, Vec<f64>)> = schema
        .profiles
        .iter()
        .map(|p| {
            let text = document_text(schema, p);
            (p.table.clone(), p.column.clone(), e.embed_one(&text).values)
        })
        .collect();
    let mut best: BTreeMap<(String, String), f64> = BTreeMap::new();
    for entity in entities {
        let qv = e.embed_one(entity).values;
        let mut all: Vec<(f64, &String, &String)> = docs.iter().map(|(t, c, v)| (cosine(&qv, v), t, c)).collect();
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)).then(a.2.cmp(b.2)));
        for (s, t, c) in all.into_iter().take(k) {
            let slot = best.entry((t.clone(), c.clone())).or_insert(f64::MIN);
            *slot = slot.max(s);
        }
    }
    let mut out: Vec<ScoredColumn> = best
        .into_iter()
        .map(|((table, column), score)| ScoredColumn { table, column, score })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.table.cmp(&b.table)).then(a.column.cmp(&b.column)));
    out
}

