//! Offline schema enrichment.
//!
//! `profile_database` → `derive_keys` → `generate_descriptions` produces an
//! [`EnrichedSchema`], which is persisted with `save_metadata` and rendered
//! for prompts with `render_ddl`.

mod artifact;
mod ddl;
mod describe;
mod keys;
mod profile;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::LlmError;
use crate::proto::Scalar;

pub use artifact::{load_metadata, save_metadata, to_artifact_string, METADATA_FORMAT, METADATA_VERSION};
pub use ddl::{render_ddl, render_table_ddl};
pub use describe::{describe_prompt, generate_descriptions, DescribeOptions};
pub use keys::{derive_keys, normalize_name, KeyInferenceOptions};
pub use profile::{profile_database, DatabaseProfile, SkippedTable, DEFAULT_SAMPLE_SIZE};

/// Profiles `db`, derives its key graph and generates descriptions.
///
/// A partial description failure still yields an artifact (statistics-only
/// descriptions for the failed tables, `descriptions_complete == false`);
/// callers that must know use [`generate_descriptions`] directly.
pub fn enrich_database(
    db: &crate::sql::Database,
    database_id: &str,
    provider: &crate::llm::ProviderHandle,
    user_docs: Option<&str>,
    opts: &DescribeOptions,
) -> Result<EnrichedSchema, SchemaError> {
    let profile = profile_database(db, DEFAULT_SAMPLE_SIZE)?;
    let keys = derive_keys(db, &profile.profiles, KeyInferenceOptions::default())?;
    let mut base = EnrichedSchema::new(database_id, crate::sql::DEFAULT_DIALECT, profile.profiles, keys);
    base.source_path = Some(db.path().display().to_string());
    match generate_descriptions(&base, provider, user_docs, opts) {
        Ok(s) => Ok(s),
        Err(SchemaError::ProviderRefusal { partial, failed_tables, source }) => {
            tracing::warn!(?failed_tables, error = %source, "some tables kept statistics-only descriptions");
            Ok(*partial)
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("connection failure: {0}")]
    ConnectionFailure(String),
    #[error("selection names unknown column {0}")]
    UnknownSelection(ColumnRef),
    #[error("description generation incomplete for tables {failed_tables:?}: {source}")]
    ProviderRefusal {
        partial: Box<EnrichedSchema>,
        failed_tables: Vec<String>,
        source: LlmError,
    },
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("metadata artifact version mismatch: found {found}")]
    SchemaVersionMismatch { found: String },
    #[error("malformed metadata artifact: {0}")]
    Malformed(String),
}

impl From<rusqlite::Error> for SchemaError {
    fn from(e: rusqlite::Error) -> Self {
        SchemaError::ConnectionFailure(e.to_string())
    }
}

/// A (table, column) pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        Self {
            table: table.into(),
            column: column.into(),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub table: String,
    pub column: String,
    /// Position of the column in its table, starting at 0.
    pub ordinal: usize,
    pub declared_type: String,
    pub null_count: u64,
    pub distinct_count: u64,
    pub example_values: Vec<Scalar>,
    pub row_count: u64,
}

impl ColumnProfile {
    pub fn column_ref(&self) -> ColumnRef {
        ColumnRef::new(&self.table, &self.column)
    }

    /// Every row holds a distinct non-null value.
    pub fn is_unique(&self) -> bool {
        self.row_count > 0 && self.null_count == 0 && self.distinct_count == self.row_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyProvenance {
    Declared,
    Inferred,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ForeignKey {
    pub from_table: String,
    pub from_column: String,
    pub to_table: String,
    pub to_column: String,
    pub provenance: KeyProvenance,
}

impl ForeignKey {
    pub fn same_edge(&self, other: &ForeignKey) -> bool {
        self.from_table == other.from_table
            && self.from_column == other.from_column
            && self.to_table == other.to_table
            && self.to_column == other.to_column
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyGraph {
    pub primary_keys: BTreeMap<String, Vec<String>>,
    pub foreign_keys: Vec<ForeignKey>,
}

impl KeyGraph {
    pub fn primary_key(&self, table: &str) -> &[String] {
        self.primary_keys.get(table).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn edges_touching<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a ForeignKey> + 'a {
        self.foreign_keys
            .iter()
            .filter(move |fk| fk.from_table == table || fk.to_table == table)
    }
}

/// The persisted offline artifact for one database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedSchema {
    pub database_id: String,
    pub dialect: String,
    /// Path of the database file the artifact was built from.
    #[serde(default)]
    pub source_path: Option<String>,
    pub profiles: Vec<ColumnProfile>,
    pub keys: KeyGraph,
    pub table_descriptions: BTreeMap<String, String>,
    pub column_descriptions: BTreeMap<String, BTreeMap<String, String>>,
    pub business_rules: Vec<String>,
    pub descriptions_complete: bool,
    pub generated_at: String,
}

impl EnrichedSchema {
    /// Builds an artifact with an (empty) description slot for every table
    /// and column.
    pub fn new(database_id: impl Into<String>, dialect: impl Into<String>, profiles: Vec<ColumnProfile>, keys: KeyGraph) -> Self {
        let mut table_descriptions = BTreeMap::new();
        let mut column_descriptions: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for p in &profiles {
            table_descriptions.entry(p.table.clone()).or_insert_with(String::new);
            column_descriptions
                .entry(p.table.clone())
                .or_default()
                .insert(p.column.clone(), String::new());
        }
        Self {
            database_id: database_id.into(),
            dialect: dialect.into(),
            source_path: None,
            profiles,
            keys,
            table_descriptions,
            column_descriptions,
            business_rules: Vec::new(),
            descriptions_complete: false,
            generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    /// Table names in artifact order (sorted by name).
    pub fn tables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for p in &self.profiles {
            if out.last() != Some(&p.table.as_str()) && !out.contains(&p.table.as_str()) {
                out.push(&p.table);
            }
        }
        out
    }

    pub fn columns_of<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a ColumnProfile> + 'a {
        self.profiles.iter().filter(move |p| p.table == table)
    }

    pub fn profile(&self, table: &str, column: &str) -> Option<&ColumnProfile> {
        self.profiles.iter().find(|p| p.table == table && p.column == column)
    }

    pub fn has_column(&self, c: &ColumnRef) -> bool {
        self.profile(&c.table, &c.column).is_some()
    }

    pub fn all_columns(&self) -> impl Iterator<Item = ColumnRef> + '_ {
        self.profiles.iter().map(ColumnProfile::column_ref)
    }

    pub fn table_description(&self, table: &str) -> &str {
        self.table_descriptions.get(table).map(String::as_str).unwrap_or("")
    }

    pub fn column_description(&self, table: &str, column: &str) -> &str {
        self.column_descriptions
            .get(table)
            .and_then(|m| m.get(column))
            .map(String::as_str)
            .unwrap_or("")
    }
}
