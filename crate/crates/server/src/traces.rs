use std::collections::VecDeque;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use ledgersql_core::orchestrator::JsonlTraceWriter;
use ledgersql_core::proto::SessionTrace;

use crate::ServerError;

const SUFFIX: &str = ".jsonl";

/// Session traces on disk, one JSONL file per trace, keeping at most
/// `retention` of them. The oldest finished trace is deleted first.
#[derive(Debug)]
pub struct TraceStore {
    dir: PathBuf,
    retention: usize,
    finished: Mutex<VecDeque<String>>,
}

/// Trace ids become file names, so only a conservative alphabet is accepted.
pub fn valid_trace_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl TraceStore {
    /// Opens `dir`, adopting traces left by earlier runs oldest first.
    pub fn open(dir: impl Into<PathBuf>, retention: usize) -> Result<Self, ServerError> {
        let dir = dir.into();
        let io = |source| ServerError::DataDir { path: dir.clone(), source };
        std::fs::create_dir_all(&dir).map_err(io)?;
        let mut existing: Vec<(std::time::SystemTime, String)> = std::fs::read_dir(&dir)
            .map_err(io)?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().to_str()?.strip_suffix(SUFFIX)?.to_string();
                let modified = e.metadata().ok()?.modified().ok()?;
                valid_trace_id(&name).then_some((modified, name))
            })
            .collect();
        existing.sort();
        let store = Self {
            dir,
            retention: retention.max(1),
            finished: Mutex::new(existing.into_iter().map(|(_, id)| id).collect()),
        };
        store.evict();
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, trace_id: &str) -> PathBuf {
        self.dir.join(format!("{trace_id}{SUFFIX}"))
    }

    /// A writer for a new trace. Call [`TraceStore::finish`] once the session ends.
    pub fn create(&self, trace_id: &str) -> std::io::Result<JsonlTraceWriter<BufWriter<File>>> {
        Ok(JsonlTraceWriter::new(BufWriter::new(File::create(self.path(trace_id))?)))
    }

    pub fn finish(&self, trace_id: &str) {
        self.finished.lock().expect("trace list lock").push_back(trace_id.to_string());
        self.evict();
    }

    pub fn get(&self, trace_id: &str) -> Result<Option<SessionTrace>, ServerError> {
        if !valid_trace_id(trace_id) {
            return Ok(None);
        }
        let text = match std::fs::read_to_string(self.path(trace_id)) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(ServerError::Trace(e.to_string())),
        };
        SessionTrace::from_jsonl(&text).map(Some).map_err(ServerError::Trace)
    }

    pub fn len(&self) -> usize {
        self.finished.lock().expect("trace list lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn evict(&self) {
        let mut finished = self.finished.lock().expect("trace list lock");
        while finished.len() > self.retention {
            let Some(old) = finished.pop_front() else { break };
            if let Err(e) = std::fs::remove_file(self.path(&old)) {
                tracing::warn!(trace_id = %old, error = %e, "could not delete expired trace");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ledgersql_core::orchestrator::TraceSink;
    use ledgersql_core::proto::TraceHeader;

    fn write(store: &TraceStore, id: &str) {
        let mut w = store.create(id).unwrap();
        w.header(&TraceHeader::new(id, "db", "q")).unwrap();
        drop(w);
        store.finish(id);
    }

    #[test]
    fn retention_drops_oldest() {
        let dir = tempfile::tempdir().unwrap();
        let store = TraceStore::open(dir.path(), 2).unwrap();
        for id in ["a", "b", "c"] {
            write(&store, id);
        }
        assert!(store.get("a").unwrap().is_none());
        assert_eq!(store.get("c").unwrap().unwrap().header.trace_id, "c");
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn rejects_path_like_ids() {
        assert!(!valid_trace_id("../etc/passwd"));
        assert!(!valid_trace_id(""));
        assert!(valid_trace_id("bench-1-t2"));
    }

    #[test]
    fn reopening_adopts_existing_traces() {
        let dir = tempfile::tempdir().unwrap();
        let store = TraceStore::open(dir.path(), 5).unwrap();
        write(&store, "x");
        let again = TraceStore::open(dir.path(), 5).unwrap();
        assert_eq!(again.len(), 1);
        assert!(again.get("x").unwrap().is_some());
    }
}
