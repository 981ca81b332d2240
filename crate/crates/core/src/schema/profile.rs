use rusqlite::types::ValueRef;
use rusqlite::Connection;
use serde::{Deserialize, Serialize};

use super::{ColumnProfile, SchemaError};
use crate::proto::Scalar;
use crate::sql::Database;

pub const DEFAULT_SAMPLE_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedTable {
    pub table: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseProfile {
    pub profiles: Vec<ColumnProfile>,
    /// Tables that could not be read. They are reported here, never dropped silently.
    pub skipped: Vec<SkippedTable>,
}

pub(crate) fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

pub(crate) fn list_tables(conn: &Connection) -> Result<Vec<String>, SchemaError> {
    let mut stmt = conn.prepare(
        "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY name",
    )?;
    let names = stmt
        .query_map([], |r| r.get::<_, String>(0))?
        .collect::<Result<Vec<_>, _>>()?;
    Ok(names)
}

/// (name, declared type, pk position) in column order.
pub(crate) fn table_columns(conn: &Connection, table: &str) -> rusqlite::Result<Vec<(String, String, i64)>> {
    let mut stmt = conn.prepare("SELECT name, type, pk FROM pragma_table_info(?1) ORDER BY cid")?;
    let cols = stmt
        .query_map([table], |r| Ok((r.get(0)?, r.get::<_, Option<String>>(1)?.unwrap_or_default(), r.get(2)?)))?
        .collect::<Result<Vec<_>, _>>()?;
    Ok(cols)
}

pub(crate) fn scalar_of(v: ValueRef<'_>) -> Scalar {
    match v {
        ValueRef::Null => Scalar::Null,
        ValueRef::Integer(i) => Scalar::Integer(i),
        ValueRef::Real(r) => Scalar::Real(r),
        ValueRef::Text(t) => Scalar::Text(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Scalar::Blob(b.to_vec()),
    }
}

/// One profile per (table, column), ordered by table name then column ordinal.
///
/// Example values are the `sample_size` smallest distinct non-null values
/// under the engine's native ordering.
pub fn profile_database(db: &Database, sample_size: usize) -> Result<DatabaseProfile, SchemaError> {
    let conn = db.connection();
    let mut profiles = Vec::new();
    let mut skipped = Vec::new();
    for table in list_tables(conn)? {
        match profile_table(conn, &table, sample_size) {
            Ok(mut p) => profiles.append(&mut p),
            Err(e) => {
                tracing::warn!(table = %table, error = %e, "skipping unreadable table");
                skipped.push(SkippedTable {
                    table,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(DatabaseProfile { profiles, skipped })
}

fn profile_table(conn: &Connection, table: &str, sample_size: usize) -> rusqlite::Result<Vec<ColumnProfile>> {
    let columns = table_columns(conn, table)?;
    if columns.is_empty() {
        return Ok(Vec::new());
    }
    let t = quote_ident(table);
    let aggregates: Vec<String> = columns
        .iter()
        .map(|(name, _, _)| {
            let c = quote_ident(name);
            format!("COUNT({c}), COUNT(DISTINCT {c})")
        })
        .collect();
    let sql = format!("SELECT COUNT(*), {} FROM {t}", aggregates.join(", "));
    let counts: Vec<u64> = conn.query_row(&sql, [], |r| {
        (0..1 + 2 * columns.len())
            .map(|i| r.get::<_, i64>(i).map(|v| v as u64))
            .collect()
    })?;
    let row_count = counts[0];

    let mut out = Vec::with_capacity(columns.len());
    for (ordinal, (name, declared_type, _)) in columns.iter().enumerate() {
        let c = quote_ident(name);
        let non_null = counts[1 + 2 * ordinal];
        let distinct = counts[2 + 2 * ordinal];
        let mut stmt = conn.prepare(&format!(
            "SELECT DISTINCT {c} FROM {t} WHERE {c} IS NOT NULL ORDER BY {c} LIMIT {sample_size}"
        ))?;
        let examples = stmt
            .query_map([], |r| Ok(scalar_of(r.get_ref(0)?)))?
            .collect::<Result<Vec<_>, _>>()?;
        out.push(ColumnProfile {
            table: table.to_string(),
            column: name.clone(),
            ordinal,
            declared_type: declared_type.clone(),
            null_count: row_count - non_null,
            distinct_count: distinct,
            example_values: examples,
            row_count,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db_with(sql: &str) -> (tempfile::TempDir, Database) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.sqlite");
        Connection::open(&path).unwrap().execute_batch(sql).unwrap();
        let db = Database::open_read_only(&path).unwrap();
        (dir, db)
    }

    #[test]
    fn empty_table() {
        let (_d, db) = db_with("CREATE TABLE t (a INTEGER);");
        let p = profile_database(&db, 3).unwrap();
        assert_eq!(p.profiles.len(), 1);
        let c = &p.profiles[0];
        assert_eq!((c.row_count, c.null_count, c.distinct_count), (0, 0, 0));
        assert!(c.example_values.is_empty());
    }

    #[test]
    fn toy_counts() {
        let (_d, db) = db_with(
            "CREATE TABLE t (a INTEGER, b TEXT);
             INSERT INTO t VALUES (1, NULL), (2, 'x'), (2, 'x');",
        );
        let p = profile_database(&db, 3).unwrap().profiles;
        assert_eq!((p[0].distinct_count, p[0].null_count), (2, 0));
        assert_eq!((p[1].distinct_count, p[1].null_count), (1, 1));
        assert_eq!(p[0].example_values, vec![Scalar::Integer(1), Scalar::Integer(2)]);
        assert_eq!(p[1].example_values, vec![Scalar::Text("x".into())]);
    }

    #[test]
    fn ordering_and_sample_cap() {
        let (_d, db) = db_with(
            "CREATE TABLE zeta (k INTEGER, j INTEGER);
             CREATE TABLE \"order\" (id INTEGER);
             INSERT INTO \"order\" VALUES (5), (4), (3), (2), (1);",
        );
        let p = profile_database(&db, 3).unwrap().profiles;
        let names: Vec<String> = p.iter().map(|c| c.column_ref().to_string()).collect();
        assert_eq!(names, ["order.id", "zeta.k", "zeta.j"]);
        assert_eq!(p[0].example_values, vec![Scalar::Integer(1), Scalar::Integer(2), Scalar::Integer(3)]);
    }
}
