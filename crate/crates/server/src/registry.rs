use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ledgersql_core::eval::ArtifactStore;
use ledgersql_core::proto::DatabaseInfo;
use ledgersql_core::retrieval::SchemaIndex;
use ledgersql_core::schema::{load_metadata, EnrichedSchema};

use crate::ServerError;

const METADATA_SUFFIX: &str = ".metadata.json";

/// Artifacts of one enriched database. Immutable once loaded and shared by
/// every request; each request opens its own connection to `db_path`.
#[derive(Debug)]
pub struct DatabaseEntry {
    pub schema: EnrichedSchema,
    pub index: SchemaIndex,
    pub db_path: PathBuf,
}

impl DatabaseEntry {
    pub fn info(&self) -> DatabaseInfo {
        DatabaseInfo {
            id: self.schema.database_id.clone(),
            dialect: self.schema.dialect.clone(),
            tables: self.schema.tables().len(),
            columns: self.schema.profiles.len(),
        }
    }
}

#[derive(Debug, Default)]
pub struct Registry {
    entries: BTreeMap<String, Arc<DatabaseEntry>>,
}

impl Registry {
    /// Loads every `<id>.metadata.json` in `data_dir` together with
    /// `<id>.index.json`. The database file is `<id>.sqlite` next to them, or
    /// the source path recorded at enrichment time. Incomplete entries are
    /// skipped with a warning.
    pub fn load(data_dir: &Path) -> Result<Self, ServerError> {
        let store = ArtifactStore::new(data_dir);
        let mut entries = BTreeMap::new();
        let listing = std::fs::read_dir(data_dir).map_err(|source| ServerError::DataDir {
            path: data_dir.to_path_buf(),
            source,
        })?;
        let mut ids: Vec<String> = listing
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(METADATA_SUFFIX)).map(str::to_string))
            .collect();
        ids.sort();
        for id in ids {
            match load_entry(&store, data_dir, &id) {
                Ok(entry) => {
                    entries.insert(id, Arc::new(entry));
                }
                Err(reason) => tracing::warn!(database = %id, %reason, "skipping database"),
            }
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, entry: DatabaseEntry) {
        self.entries.insert(entry.schema.database_id.clone(), Arc::new(entry));
    }

    pub fn get(&self, id: &str) -> Option<Arc<DatabaseEntry>> {
        self.entries.get(id).cloned()
    }

    pub fn list(&self) -> Vec<DatabaseInfo> {
        self.entries.values().map(|e| e.info()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn load_entry(store: &ArtifactStore, data_dir: &Path, id: &str) -> Result<DatabaseEntry, String> {
    let schema = load_metadata(&store.metadata_path(id)).map_err(|e| e.to_string())?;
    let index = SchemaIndex::load(&store.index_path(id)).map_err(|e| e.to_string())?;
    let local = data_dir.join(format!("{id}.sqlite"));
    let db_path = if local.is_file() {
        local
    } else {
        schema
            .source_path
            .as_ref()
            .map(PathBuf::from)
            .filter(|p| p.is_file())
            .ok_or_else(|| format!("no database file at {}", local.display()))?
    };
    Ok(DatabaseEntry { schema, index, db_path })
}
