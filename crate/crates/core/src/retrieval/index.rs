use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::RetrievalError;
use crate::llm::{self, cosine, EmbeddingVector, Embedder};
use crate::schema::{ColumnProfile, ColumnRef, EnrichedSchema};

pub const INDEX_FORMAT: &str = "ledgersql.index";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaDocument {
    pub table: String,
    pub column: String,
    pub text: String,
    pub vector: EmbeddingVector,
}

impl SchemaDocument {
    pub fn column_ref(&self) -> ColumnRef {
        ColumnRef::new(&self.table, &self.column)
    }
}

/// Flat index: one document per (table, column), scanned exhaustively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaIndex {
    pub database_id: String,
    pub embedder_id: String,
    pub dimension: usize,
    pub documents: Vec<SchemaDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredColumn {
    pub table: String,
    pub column: String,
    pub score: f64,
}

impl ScoredColumn {
    pub fn column_ref(&self) -> ColumnRef {
        ColumnRef::new(&self.table, &self.column)
    }
}

/// Name, description and example values of one column.
pub fn document_text(schema: &EnrichedSchema, profile: &ColumnProfile) -> String {
    let examples: Vec<String> = profile.example_values.iter().map(ToString::to_string).collect();
    let mut text = format!("{}.{}", profile.table, profile.column);
    let desc = schema.column_description(&profile.table, &profile.column);
    if !desc.is_empty() {
        text.push_str(": ");
        text.push_str(desc);
    }
    if !examples.is_empty() {
        text.push_str(" | examples: ");
        text.push_str(&examples.join(", "));
    }
    text
}

pub fn build_index(schema: &EnrichedSchema, embedder: &dyn Embedder) -> Result<SchemaIndex, RetrievalError> {
    let texts: Vec<String> = schema.profiles.iter().map(|p| document_text(schema, p)).collect();
    let vectors = llm::embed_batch(embedder, &texts)?;
    let documents = schema
        .profiles
        .iter()
        .zip(texts)
        .zip(vectors)
        .map(|((p, text), vector)| SchemaDocument {
            table: p.table.clone(),
            column: p.column.clone(),
            text,
            vector,
        })
        .collect();
    Ok(SchemaIndex {
        database_id: schema.database_id.clone(),
        embedder_id: embedder.id(),
        dimension: embedder.dimension(),
        documents,
    })
}

fn rank(a: &ScoredColumn, b: &ScoredColumn) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.table.cmp(&b.table))
        .then_with(|| a.column.cmp(&b.column))
}

/// Top `k` documents per entity, merged keeping each column's best score,
/// sorted by descending score then (table, column).
pub fn retrieve(index: &SchemaIndex, entities: &[String], k: usize, embedder: &dyn Embedder) -> Result<Vec<ScoredColumn>, RetrievalError> {
    if index.documents.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    if embedder.id() != index.embedder_id {
        return Err(RetrievalError::EmbedderMismatch {
            built: index.embedder_id.clone(),
            query: embedder.id(),
        });
    }
    let queries: Vec<String> = entities.iter().filter(|e| !e.trim().is_empty()).cloned().collect();
    let vectors = llm::embed_batch(embedder, &queries)?;

    let mut best: BTreeMap<(String, String), f64> = BTreeMap::new();
    for q in &vectors {
        let mut scored: Vec<ScoredColumn> = index
            .documents
            .iter()
            .map(|d| ScoredColumn {
                table: d.table.clone(),
                column: d.column.clone(),
                score: cosine(&q.values, &d.vector.values),
            })
            .collect();
        scored.sort_by(rank);
        for s in scored.into_iter().take(k) {
            let slot = best.entry((s.table, s.column)).or_insert(f64::NEG_INFINITY);
            if s.score > *slot {
                *slot = s.score;
            }
        }
    }
    let mut out: Vec<ScoredColumn> = best
        .into_iter()
        .map(|((table, column), score)| ScoredColumn { table, column, score })
        .collect();
    out.sort_by(rank);
    Ok(out)
}

impl SchemaIndex {
    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let body = serde_json::json!({
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "index": self,
        });
        std::fs::write(path, serde_json::to_string(&body).expect("index serializes"))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let text = std::fs::read_to_string(path)?;
        let mut raw: Value = serde_json::from_str(&text).map_err(|e| RetrievalError::Malformed(e.to_string()))?;
        let format = raw.get("format").and_then(Value::as_str).unwrap_or_default().to_string();
        let version = raw.get("version").and_then(Value::as_u64);
        if format != INDEX_FORMAT || version != Some(INDEX_VERSION as u64) {
            return Err(RetrievalError::VersionMismatch {
                found: format!("{format}/{}", version.map(|v| v.to_string()).unwrap_or_else(|| "?".into())),
            });
        }
        let index = raw.get_mut("index").map(Value::take).ok_or_else(|| RetrievalError::Malformed("missing index".into()))?;
        serde_json::from_value(index).map_err(|e| RetrievalError::Malformed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::HashEmbedder;
    use crate::schema::KeyGraph;

    fn schema(columns: &[(&str, &str)]) -> EnrichedSchema {
        let profiles = columns
            .iter()
            .enumerate()
            .map(|(i, (t, c))| ColumnProfile {
                table: t.to_string(),
                column: c.to_string(),
                ordinal: i,
                declared_type: "TEXT".into(),
                null_count: 0,
                distinct_count: 0,
                example_values: vec![],
                row_count: 0,
            })
            .collect();
        EnrichedSchema::new("db", "sqlite", profiles, KeyGraph::default())
    }

    #[test]
    fn empty_schema_gives_empty_index() {
        let index = build_index(&schema(&[]), &HashEmbedder::default()).unwrap();
        assert!(index.is_empty());
        assert!(matches!(retrieve(&index, &["x".into()], 3, &HashEmbedder::default()), Err(RetrievalError::EmptyIndex)));
    }

    #[test]
    fn self_similarity_ranks_first() {
        let e = HashEmbedder::default();
        let index = build_index(&schema(&[("loan", "amount"), ("loan", "duration"), ("account", "date")]), &e).unwrap();
        let query = index.documents[1].text.clone();
        let got = retrieve(&index, &[query], 3, &e).unwrap();
        assert_eq!((got[0].table.as_str(), got[0].column.as_str()), ("loan", "duration"));
        assert!((got[0].score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn k_clamped_to_corpus() {
        let e = HashEmbedder::default();
        let index = build_index(&schema(&[("a", "x"), ("b", "y")]), &e).unwrap();
        assert_eq!(retrieve(&index, &["x".into()], 50, &e).unwrap().len(), 2);
    }

    #[test]
    fn persist_round_trip() {
        let e = HashEmbedder::default();
        let index = build_index(&schema(&[("loan", "amount"), ("loan", "duration")]), &e).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.json");
        index.save(&path).unwrap();
        assert_eq!(SchemaIndex::load(&path).unwrap(), index);
    }
}
