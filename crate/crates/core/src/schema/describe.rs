use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::Value;

use super::{ColumnProfile, EnrichedSchema, SchemaError};
use crate::llm::{self, ChatMessage, ChatRequest, LlmError, ModelSettings, ProviderHandle};
use crate::prompts::extract_json_object;

#[derive(Debug, Clone)]
pub struct DescribeOptions {
    pub model: ModelSettings,
    /// Tables described concurrently. Use 1 with order-sensitive scripted providers.
    pub parallelism: usize,
}

impl Default for DescribeOptions {
    fn default() -> Self {
        Self {
            model: ModelSettings::default(),
            parallelism: 1,
        }
    }
}

const DESCRIBE_SYSTEM: &str = "You document relational databases for analysts who write SQL. \
Descriptions must be dense and factual: meaning of the data, units, value formats and codes, \
and how the table relates to others.";

fn examples(p: &ColumnProfile) -> String {
    p.example_values.iter().map(|v| format!("{v:?}").replace("Text(", "(")).collect::<Vec<_>>().join(", ")
}

/// The per-table description prompt. Contains every column's statistics and
/// example values, the key relationships touching the table and the user's
/// documentation verbatim.
pub fn describe_prompt(schema: &EnrichedSchema, table: &str, user_docs: Option<&str>) -> String {
    let mut out = String::new();
    let row_count = schema.columns_of(table).next().map(|p| p.row_count).unwrap_or(0);
    let _ = writeln!(out, "[DESCRIBE] Describe table \"{table}\" of database \"{}\".", schema.database_id);
    let _ = writeln!(
        out,
        "Reply with JSON only: {{\"table\": \"<table description>\", \"columns\": {{\"<column>\": \"<description>\"}}}}"
    );
    let _ = writeln!(out, "\nTable {table} ({row_count} rows)");
    let pk = schema.keys.primary_key(table);
    if !pk.is_empty() {
        let _ = writeln!(out, "Primary key: {}", pk.join(", "));
    }
    let edges: Vec<_> = schema.keys.edges_touching(table).collect();
    if !edges.is_empty() {
        let _ = writeln!(out, "Key relationships:");
        for fk in edges {
            let _ = writeln!(
                out,
                "  {}.{} -> {}.{} ({:?})",
                fk.from_table, fk.from_column, fk.to_table, fk.to_column, fk.provenance
            );
        }
    }
    let _ = writeln!(out, "Columns:");
    for p in schema.columns_of(table) {
        let ty = if p.declared_type.is_empty() { "untyped" } else { p.declared_type.as_str() };
        let _ = writeln!(
            out,
            "  - {} {ty}: nulls {}, distinct {}, examples [{}]",
            p.column,
            p.null_count,
            p.distinct_count,
            examples(p)
        );
    }
    if !schema.business_rules.is_empty() {
        let _ = writeln!(out, "Business rules:");
        for r in &schema.business_rules {
            let _ = writeln!(out, "  - {r}");
        }
    }
    if let Some(docs) = user_docs.filter(|d| !d.trim().is_empty()) {
        let _ = writeln!(out, "User documentation:\n{docs}");
    }
    out
}

fn statistical_description(p: &ColumnProfile) -> String {
    format!(
        "{} column; {} distinct values, {} nulls of {} rows; e.g. {}",
        if p.declared_type.is_empty() { "untyped" } else { p.declared_type.as_str() },
        p.distinct_count,
        p.null_count,
        p.row_count,
        examples(p)
    )
}

struct TableDescriptions {
    table: String,
    columns: BTreeMap<String, String>,
}

fn parse_reply(reply: &str, columns: &[&ColumnProfile]) -> (String, BTreeMap<String, String>) {
    let trimmed = reply.trim();
    let structured = extract_json_object(trimmed).and_then(|v| {
        let table = v.get("table")?.as_str()?.trim().to_string();
        let cols = v.get("columns").and_then(Value::as_object).cloned().unwrap_or_default();
        Some((table, cols))
    });
    let mut out = BTreeMap::new();
    match structured {
        Some((table, cols)) => {
            for p in columns {
                let d = cols
                    .get(&p.column)
                    .and_then(Value::as_str)
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .unwrap_or_else(|| statistical_description(p));
                out.insert(p.column.clone(), d);
            }
            let table = if table.is_empty() { format!("Table with {} columns", columns.len()) } else { table };
            (table, out)
        }
        None if !trimmed.is_empty() => {
            for p in columns {
                out.insert(p.column.clone(), trimmed.to_string());
            }
            (trimmed.to_string(), out)
        }
        None => {
            for p in columns {
                out.insert(p.column.clone(), statistical_description(p));
            }
            (format!("Table with {} columns", columns.len()), out)
        }
    }
}

fn describe_table(
    schema: &EnrichedSchema,
    table: &str,
    provider: &ProviderHandle,
    user_docs: Option<&str>,
    opts: &DescribeOptions,
) -> Result<(String, TableDescriptions), LlmError> {
    let prompt = describe_prompt(schema, table, user_docs);
    let request = ChatRequest::new(&opts.model, vec![ChatMessage::system(DESCRIBE_SYSTEM), ChatMessage::user(prompt)]);
    let reply = llm::complete(provider.as_ref(), &request)?;
    let columns: Vec<&ColumnProfile> = schema.columns_of(table).collect();
    let (table_desc, cols) = parse_reply(&reply.content, &columns);
    Ok((
        table_desc,
        TableDescriptions {
            table: table.to_string(),
            columns: cols,
        },
    ))
}

/// (table description, column descriptions) of one table, or the provider failure.
type Described = Result<(String, TableDescriptions), LlmError>;

/// Fills every table and column description, one provider call per table.
///
/// Tables whose call fails get statistics-only descriptions; the artifact is
/// then returned inside [`SchemaError::ProviderRefusal`] with
/// `descriptions_complete == false`.
pub fn generate_descriptions(
    schema: &EnrichedSchema,
    provider: &ProviderHandle,
    user_docs: Option<&str>,
    opts: &DescribeOptions,
) -> Result<EnrichedSchema, SchemaError> {
    let tables: Vec<String> = schema.tables().into_iter().map(str::to_string).collect();
    let results: Vec<(String, Described)> = if opts.parallelism <= 1 {
        tables
            .iter()
            .map(|t| (t.clone(), describe_table(schema, t, provider, user_docs, opts)))
            .collect()
    } else {
        let mut slots: Vec<Option<Described>> = (0..tables.len()).map(|_| None).collect();
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots_lock = std::sync::Mutex::new(&mut slots);
        std::thread::scope(|s| {
            for _ in 0..opts.parallelism.min(tables.len().max(1)) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= tables.len() {
                        break;
                    }
                    let r = describe_table(schema, &tables[i], provider, user_docs, opts);
                    slots_lock.lock().expect("slots lock")[i] = Some(r);
                });
            }
        });
        tables
            .iter()
            .cloned()
            .zip(slots.into_iter().map(|s| s.expect("every table described")))
            .collect()
    };

    let mut out = schema.clone();
    let mut failed = Vec::new();
    let mut first_error = None;
    for (table, result) in results {
        match result {
            Ok((table_desc, cols)) => {
                out.table_descriptions.insert(cols.table.clone(), table_desc);
                out.column_descriptions.insert(cols.table, cols.columns);
            }
            Err(e) => {
                tracing::warn!(%table, error = %e, "description generation failed");
                let columns: Vec<&ColumnProfile> = schema.columns_of(&table).collect();
                let (table_desc, cols) = parse_reply("", &columns);
                out.table_descriptions.insert(table.clone(), table_desc);
                out.column_descriptions.insert(table.clone(), cols);
                failed.push(table);
                first_error.get_or_insert(e);
            }
        }
    }
    out.descriptions_complete = failed.is_empty();
    match first_error {
        None => Ok(out),
        Some(source) => Err(SchemaError::ProviderRefusal {
            partial: Box::new(out),
            failed_tables: failed,
            source,
        }),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::llm::{RecordingProvider, ScriptEntry, ScriptedProvider};
    use crate::proto::Scalar;
    use crate::schema::{ForeignKey, KeyGraph, KeyProvenance};

    fn toy() -> EnrichedSchema {
        let p = |t: &str, c: &str, ord: usize, ex: Vec<Scalar>| ColumnProfile {
            table: t.into(),
            column: c.into(),
            ordinal: ord,
            declared_type: "INTEGER".into(),
            null_count: 0,
            distinct_count: 3,
            example_values: ex,
            row_count: 3,
        };
        let mut keys = KeyGraph::default();
        keys.primary_keys.insert("account".into(), vec!["account_id".into()]);
        keys.foreign_keys.push(ForeignKey {
            from_table: "loan".into(),
            from_column: "account_id".into(),
            to_table: "account".into(),
            to_column: "account_id".into(),
            provenance: KeyProvenance::Declared,
        });
        EnrichedSchema::new(
            "bank",
            "sqlite",
            vec![
                p("account", "account_id", 0, vec![Scalar::Integer(1), Scalar::Integer(2)]),
                p("account", "A", 1, vec![Scalar::Text("1997-01-01".into())]),
                p("loan", "account_id", 0, vec![Scalar::Integer(7)]),
            ],
            keys,
        )
    }

    #[test]
    fn scripted_desc_everywhere() {
        let provider: ProviderHandle = Arc::new(ScriptedProvider::new(vec![ScriptEntry::sticky("*", "DESC")]).unwrap());
        let out = generate_descriptions(&toy(), &provider, None, &DescribeOptions::default()).unwrap();
        assert!(out.descriptions_complete);
        assert!(out.table_descriptions.values().all(|d| d == "DESC"));
        assert!(out.column_descriptions.values().flat_map(|m| m.values()).all(|d| d == "DESC"));
    }

    #[test]
    fn prompt_carries_examples_edges_and_docs() {
        let inner: ProviderHandle = Arc::new(ScriptedProvider::new(vec![ScriptEntry::sticky("*", "DESC")]).unwrap());
        let recorder = Arc::new(RecordingProvider::new(inner));
        let provider: ProviderHandle = recorder.clone();
        let docs = "A = account opening date";
        generate_descriptions(&toy(), &provider, Some(docs), &DescribeOptions::default()).unwrap();
        let requests = recorder.requests();
        assert_eq!(requests.len(), 2, "one call per table");
        let account = requests.iter().map(|r| r.transcript()).find(|t| t.contains("table \"account\"")).unwrap();
        assert!(account.contains("1997-01-01"));
        assert!(account.contains("loan.account_id -> account.account_id"));
        assert!(account.contains(docs));
    }

    #[test]
    fn structured_reply_parsed() {
        let reply = r#"Here you go: {"table": "Loans granted", "columns": {"account_id": "owning account"}}"#;
        let provider: ProviderHandle = Arc::new(
            ScriptedProvider::new(vec![ScriptEntry::text("\"loan\"", reply), ScriptEntry::sticky("*", "other")]).unwrap(),
        );
        let out = generate_descriptions(&toy(), &provider, None, &DescribeOptions::default()).unwrap();
        assert_eq!(out.table_description("loan"), "Loans granted");
        assert_eq!(out.column_description("loan", "account_id"), "owning account");
    }

    #[test]
    fn refusal_keeps_partial_results() {
        let provider: ProviderHandle = Arc::new(
            ScriptedProvider::from_script(">>> \"account\"\n!refusal no\n>>>* *\nDESC").unwrap(),
        );
        let err = generate_descriptions(&toy(), &provider, None, &DescribeOptions::default()).unwrap_err();
        let SchemaError::ProviderRefusal { partial, failed_tables, .. } = err else {
            panic!("expected refusal");
        };
        assert_eq!(failed_tables, vec!["account".to_string()]);
        assert!(!partial.descriptions_complete);
        assert_eq!(partial.table_description("loan"), "DESC");
        assert!(!partial.column_description("account", "A").is_empty());
    }

    #[test]
    fn parallel_matches_sequential() {
        let provider: ProviderHandle = Arc::new(ScriptedProvider::new(vec![ScriptEntry::sticky("*", "DESC")]).unwrap());
        let seq = generate_descriptions(&toy(), &provider, None, &DescribeOptions::default()).unwrap();
        let opts = DescribeOptions {
            parallelism: 4,
            ..Default::default()
        };
        let par = generate_descriptions(&toy(), &provider, None, &opts).unwrap();
        assert_eq!(seq.column_descriptions, par.column_descriptions);
    }
}
