use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ledgersql_proto::ExecErrorKind;
use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use thiserror::Error;

use super::{guardrail_check, CandidateSql, GuardrailVerdict, HeuristicReport, ResultTable, Scalar};

pub const DEFAULT_MAGNITUDE_THRESHOLD: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?}: {message}")]
pub struct ExecError {
    pub kind: ExecErrorKind,
    pub message: String,
}

impl ExecError {
    fn execution(message: impl Into<String>) -> Self {
        Self {
            kind: ExecErrorKind::Execution,
            message: message.into(),
        }
    }
}

/// A read-only connection to a single-file database.
pub struct Database {
    conn: Connection,
    path: PathBuf,
}

impl std::fmt::Debug for Database {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Database").field("path", &self.path).finish()
    }
}

impl Database {
    pub fn open_read_only(path: impl AsRef<Path>) -> Result<Self, ExecError> {
        let path = path.as_ref().to_path_buf();
        if !path.is_file() {
            return Err(ExecError::execution(format!("database file not found: {}", path.display())));
        }
        let conn = Connection::open_with_flags(
            &path,
            OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX | OpenFlags::SQLITE_OPEN_URI,
        )
        .map_err(|e| ExecError::execution(e.to_string()))?;
        conn.pragma_update(None, "query_only", true)
            .map_err(|e| ExecError::execution(e.to_string()))?;
        Ok(Self { conn, path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn connection(&self) -> &Connection {
        &self.conn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecOptions {
    /// Rows kept in the returned table.
    pub row_limit: u64,
    /// Rows counted before the scan stops; never less than `row_limit`.
    pub count_cap: u64,
    pub timeout: Duration,
}

impl ExecOptions {
    pub fn new(row_limit: u64, timeout: Duration) -> Self {
        Self {
            row_limit,
            count_cap: row_limit,
            timeout,
        }
    }

    pub fn counting_up_to(mut self, cap: u64) -> Self {
        self.count_cap = cap;
        self
    }
}

/// Runs an allowed read statement with a row limit and a wall-clock deadline.
pub fn execute(db: &Database, candidate: &CandidateSql, opts: &ExecOptions) -> Result<ResultTable, ExecError> {
    if let GuardrailVerdict::Deny { reason, .. } = guardrail_check(candidate) {
        return Err(ExecError {
            kind: ExecErrorKind::GuardrailViolation,
            message: reason,
        });
    }
    let row_limit = opts.row_limit.max(1);
    let count_cap = opts.count_cap.max(row_limit);

    let deadline = Instant::now() + opts.timeout;
    db.conn
        .progress_handler(1_000, Some(move || Instant::now() > deadline))
        .map_err(|e| ExecError::execution(e.to_string()))?;
    let result = run(&db.conn, &candidate.sql_text, row_limit, count_cap);
    let _ = db.conn.progress_handler(0, None::<fn() -> bool>);

    result.map_err(|e| match e {
        rusqlite::Error::SqliteFailure(code, _) if code.code == rusqlite::ErrorCode::OperationInterrupted => ExecError {
            kind: ExecErrorKind::Timeout,
            message: format!("statement exceeded {:?}", opts.timeout),
        },
        other => ExecError::execution(other.to_string()),
    })
}

fn run(conn: &Connection, sql: &str, row_limit: u64, count_cap: u64) -> rusqlite::Result<ResultTable> {
    let mut stmt = conn.prepare(sql)?;
    let column_names: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
    let width = column_names.len();
    let mut rows = Vec::new();
    let mut seen: u64 = 0;
    let mut cursor = stmt.query([])?;
    while let Some(row) = cursor.next()? {
        seen += 1;
        if (rows.len() as u64) < row_limit {
            let mut values = Vec::with_capacity(width);
            for i in 0..width {
                values.push(to_scalar(row.get_ref(i)?));
            }
            rows.push(values);
        }
        if seen >= count_cap {
            if cursor.next()?.is_some() {
                seen += 1;
            }
            break;
        }
    }
    let truncated = seen > rows.len() as u64;
    Ok(ResultTable {
        column_names,
        rows,
        truncated,
        row_limit_applied: Some(row_limit),
        row_count: seen,
    })
}

fn to_scalar(v: ValueRef<'_>) -> Scalar {
    match v {
        ValueRef::Null => Scalar::Null,
        ValueRef::Integer(i) => Scalar::Integer(i),
        ValueRef::Real(r) => Scalar::Real(r),
        ValueRef::Text(t) => Scalar::Text(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Scalar::Blob(b.to_vec()),
    }
}

/// Result-set heuristics: emptiness and absolute row-count magnitude.
pub fn analyze_result(result: &ResultTable, magnitude_threshold: u64) -> HeuristicReport {
    let row_count = result.row_count.max(result.rows.len() as u64);
    let empty_result = row_count == 0;
    let magnitude_flag = row_count > magnitude_threshold;
    let mut notes = Vec::new();
    if empty_result {
        notes.push("query returned no rows".to_string());
    }
    if magnitude_flag {
        notes.push(format!(
            "row count {row_count} exceeds the absolute magnitude threshold of {magnitude_threshold}"
        ));
    }
    if result.truncated {
        notes.push(format!(
            "result clipped to {} of {} scanned rows",
            result.rows.len(),
            row_count
        ));
    }
    HeuristicReport {
        empty_result,
        row_count,
        magnitude_flag,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::SqlOrigin;

    fn cand(sql: &str) -> CandidateSql {
        CandidateSql {
            sql_text: sql.to_string(),
            dialect: "sqlite".to_string(),
            origin: SqlOrigin::Generator,
        }
    }

    fn toy_db() -> (tempfile::TempDir, Database) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.sqlite");
        let conn = Connection::open(&path).unwrap();
        conn.execute_batch(
            "CREATE TABLE n (v INTEGER);
             WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c WHERE x < 100)
             INSERT INTO n SELECT x FROM c;",
        )
        .unwrap();
        drop(conn);
        let db = Database::open_read_only(&path).unwrap();
        (dir, db)
    }

    fn table(rows: usize) -> ResultTable {
        ResultTable::new(vec!["a".into()], (0..rows).map(|i| vec![Scalar::Integer(i as i64)]).collect())
    }

    #[test]
    fn constant_query() {
        let (_d, db) = toy_db();
        let t = execute(&db, &cand("SELECT 42"), &ExecOptions::new(50, Duration::from_secs(5))).unwrap();
        assert_eq!(t.rows, vec![vec![Scalar::Integer(42)]]);
        assert!(!t.truncated);
        assert_eq!(t.column_names.len(), 1);
    }

    #[test]
    fn row_limit_clips() {
        let (_d, db) = toy_db();
        let t = execute(&db, &cand("SELECT v FROM n"), &ExecOptions::new(5, Duration::from_secs(5))).unwrap();
        assert_eq!(t.rows.len(), 5);
        assert!(t.truncated);
        assert_eq!(t.row_limit_applied, Some(5));
    }

    #[test]
    fn counting_continues_past_row_limit() {
        let (_d, db) = toy_db();
        let opts = ExecOptions::new(5, Duration::from_secs(5)).counting_up_to(1_000);
        let t = execute(&db, &cand("SELECT v FROM n"), &opts).unwrap();
        assert_eq!(t.rows.len(), 5);
        assert_eq!(t.row_count, 100);
        let opts = ExecOptions::new(5, Duration::from_secs(5)).counting_up_to(10);
        let t = execute(&db, &cand("SELECT v FROM n"), &opts).unwrap();
        assert_eq!(t.row_count, 11, "one row past the cap proves there is more");
    }

    #[test]
    fn missing_table_error_names_table() {
        let (_d, db) = toy_db();
        let err = execute(&db, &cand("SELECT * FROM nowhere"), &ExecOptions::new(5, Duration::from_secs(5))).unwrap_err();
        assert_eq!(err.kind, ExecErrorKind::Execution);
        assert!(err.message.contains("nowhere"), "{}", err.message);
    }

    #[test]
    fn denied_candidate_never_runs() {
        let (_d, db) = toy_db();
        let err = execute(&db, &cand("DELETE FROM n"), &ExecOptions::new(5, Duration::from_secs(5))).unwrap_err();
        assert_eq!(err.kind, ExecErrorKind::GuardrailViolation);
        let t = execute(&db, &cand("SELECT count(*) FROM n"), &ExecOptions::new(5, Duration::from_secs(5))).unwrap();
        assert_eq!(t.rows[0][0], Scalar::Integer(100));
    }

    #[test]
    fn runaway_query_times_out() {
        let (_d, db) = toy_db();
        let sql = "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) SELECT count(*) FROM c";
        let err = execute(&db, &cand(sql), &ExecOptions::new(5, Duration::from_millis(50))).unwrap_err();
        assert_eq!(err.kind, ExecErrorKind::Timeout);
    }

    #[test]
    fn heuristics() {
        let r = analyze_result(&table(0), 1000);
        assert!(r.empty_result && !r.magnitude_flag);
        let r = analyze_result(&table(1), 1000);
        assert!(!r.empty_result && !r.magnitude_flag);
        let r = analyze_result(&table(1001), 1000);
        assert!(r.magnitude_flag);
        assert_eq!(r.row_count, 1001);
        let r = analyze_result(&table(1000), 1000);
        assert!(!r.magnitude_flag);
    }
}
