use std::collections::{BTreeMap, HashMap};

use super::profile::{list_tables, quote_ident, table_columns};
use super::{ColumnProfile, ForeignKey, KeyGraph, KeyProvenance, SchemaError};
use crate::sql::Database;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyInferenceOptions {
    /// Distinct values of the referencing column checked for containment.
    pub containment_sample: usize,
}

impl Default for KeyInferenceOptions {
    fn default() -> Self {
        Self {
            containment_sample: 10_000,
        }
    }
}

/// Lowercase with underscores removed.
pub fn normalize_name(name: &str) -> String {
    name.chars().filter(|c| *c != '_').flat_map(char::to_lowercase).collect()
}

/// Reads declared keys from the catalog and infers foreign keys for columns
/// that have none.
///
/// An edge `A.x → B.y` is inferred when the names match after
/// normalization, `B.y` is unique, and the sampled distinct values of `A.x`
/// all occur in `B.y`. A column that is its table's sole primary key is never
/// a referencing column. Declared edges always win; inferred edges are only
/// added when they do not duplicate one.
pub fn derive_keys(db: &Database, profiles: &[ColumnProfile], opts: KeyInferenceOptions) -> Result<KeyGraph, SchemaError> {
    let conn = db.connection();
    let known: HashMap<(&str, &str), &ColumnProfile> =
        profiles.iter().map(|p| ((p.table.as_str(), p.column.as_str()), p)).collect();
    let profiled_tables: Vec<&str> = {
        let mut t: Vec<&str> = profiles.iter().map(|p| p.table.as_str()).collect();
        t.dedup();
        t
    };

    let mut primary_keys: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut edges: Vec<ForeignKey> = Vec::new();

    for table in list_tables(conn)? {
        if !profiled_tables.contains(&table.as_str()) {
            continue;
        }
        let mut pk: Vec<(i64, String)> = table_columns(conn, &table)?
            .into_iter()
            .filter(|(_, _, pos)| *pos > 0)
            .map(|(name, _, pos)| (pos, name))
            .collect();
        pk.sort();
        if !pk.is_empty() {
            primary_keys.insert(table.clone(), pk.into_iter().map(|(_, n)| n).collect());
        }
    }

    for table in &profiled_tables {
        let mut stmt = conn.prepare("SELECT \"table\", \"from\", \"to\" FROM pragma_foreign_key_list(?1) ORDER BY id, seq")?;
        let rows = stmt
            .query_map([table], |r| {
                Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, Option<String>>(2)?))
            })?
            .collect::<Result<Vec<_>, _>>()?;
        for (to_table, from_column, to_column) in rows {
            let to_column = match to_column {
                Some(c) => c,
                None => match primary_keys.get(&to_table).map(Vec::as_slice) {
                    Some([only]) => only.clone(),
                    _ => continue,
                },
            };
            if !known.contains_key(&(*table, from_column.as_str())) || !known.contains_key(&(to_table.as_str(), to_column.as_str())) {
                tracing::warn!(%table, %from_column, %to_table, %to_column, "declared foreign key references an unknown column");
                continue;
            }
            let fk = ForeignKey {
                from_table: table.to_string(),
                from_column,
                to_table,
                to_column,
                provenance: KeyProvenance::Declared,
            };
            if !edges.iter().any(|e| e.same_edge(&fk)) {
                edges.push(fk);
            }
        }
    }

    let declared_from: Vec<(String, String)> = edges
        .iter()
        .map(|e| (e.from_table.clone(), e.from_column.clone()))
        .collect();
    let is_sole_pk = |table: &str, column: &str| matches!(primary_keys.get(table).map(Vec::as_slice), Some([c]) if c == column);

    let mut inferred = Vec::new();
    for a in profiles {
        if a.row_count == a.null_count {
            continue;
        }
        if declared_from.iter().any(|(t, c)| *t == a.table && *c == a.column) || is_sole_pk(&a.table, &a.column) {
            continue;
        }
        let norm = normalize_name(&a.column);
        for b in profiles {
            if (a.table == b.table && a.column == b.column) || !b.is_unique() || normalize_name(&b.column) != norm {
                continue;
            }
            // identical value sets on two unique columns: keep one direction only
            if a.is_unique() && a.distinct_count == b.distinct_count && (a.table.as_str(), a.column.as_str()) < (b.table.as_str(), b.column.as_str()) {
                continue;
            }
            if contained(conn, a, b, opts.containment_sample)? {
                inferred.push(ForeignKey {
                    from_table: a.table.clone(),
                    from_column: a.column.clone(),
                    to_table: b.table.clone(),
                    to_column: b.column.clone(),
                    provenance: KeyProvenance::Inferred,
                });
            }
        }
    }
    for fk in inferred {
        if !edges.iter().any(|e| e.same_edge(&fk)) {
            edges.push(fk);
        }
    }

    Ok(KeyGraph {
        primary_keys,
        foreign_keys: edges,
    })
}

fn contained(conn: &rusqlite::Connection, a: &ColumnProfile, b: &ColumnProfile, sample: usize) -> Result<bool, SchemaError> {
    let (ta, ca) = (quote_ident(&a.table), quote_ident(&a.column));
    let (tb, cb) = (quote_ident(&b.table), quote_ident(&b.column));
    let sql = format!(
        "SELECT COUNT(*) FROM (SELECT DISTINCT {ca} AS v FROM {ta} WHERE {ca} IS NOT NULL ORDER BY {ca} LIMIT {sample}) \
         WHERE v NOT IN (SELECT {cb} FROM {tb} WHERE {cb} IS NOT NULL)"
    );
    let missing: i64 = conn.query_row(&sql, [], |r| r.get(0))?;
    Ok(missing == 0)
}

#[cfg(test)]
mod tests {
    use rusqlite::Connection;

    use super::*;
    use crate::schema::profile_database;

    fn graph(sql: &str) -> KeyGraph {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.sqlite");
        Connection::open(&path).unwrap().execute_batch(sql).unwrap();
        let db = Database::open_read_only(&path).unwrap();
        let profiles = profile_database(&db, 3).unwrap().profiles;
        derive_keys(&db, &profiles, KeyInferenceOptions::default()).unwrap()
    }

    fn edge(fk: &ForeignKey) -> (String, KeyProvenance) {
        (format!("{}.{}->{}.{}", fk.from_table, fk.from_column, fk.to_table, fk.to_column), fk.provenance)
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_name("Cust_ID"), "custid");
        assert_eq!(normalize_name("custid"), "custid");
    }

    #[test]
    fn declared_fk_passthrough() {
        let g = graph(
            "CREATE TABLE account (account_id INTEGER PRIMARY KEY, district_id INTEGER);
             CREATE TABLE loan (loan_id INTEGER PRIMARY KEY, account_id INTEGER REFERENCES account(account_id));
             INSERT INTO account VALUES (1, 1), (2, 1);
             INSERT INTO loan VALUES (10, 1);",
        );
        assert_eq!(g.primary_key("loan"), ["loan_id"]);
        let edges: Vec<_> = g.foreign_keys.iter().map(edge).collect();
        assert_eq!(edges, vec![("loan.account_id->account.account_id".to_string(), KeyProvenance::Declared)]);
    }

    #[test]
    fn undeclared_pair_inferred() {
        let g = graph(
            "CREATE TABLE customer (cust_id INTEGER PRIMARY KEY, name TEXT);
             CREATE TABLE orders (order_id INTEGER PRIMARY KEY, CustId INTEGER);
             INSERT INTO customer VALUES (1, 'a'), (2, 'b'), (3, 'c');
             INSERT INTO orders VALUES (1, 1), (2, 1), (3, 3);",
        );
        let edges: Vec<_> = g.foreign_keys.iter().map(edge).collect();
        assert_eq!(edges, vec![("orders.CustId->customer.cust_id".to_string(), KeyProvenance::Inferred)]);
    }

    #[test]
    fn containment_violation_blocks_inference() {
        let g = graph(
            "CREATE TABLE customer (cust_id INTEGER PRIMARY KEY);
             CREATE TABLE orders (order_id INTEGER PRIMARY KEY, cust_id INTEGER);
             INSERT INTO customer VALUES (1), (2);
             INSERT INTO orders VALUES (1, 1), (2, 99);",
        );
        assert!(g.foreign_keys.is_empty());
    }

    #[test]
    fn self_reference() {
        let g = graph(
            "CREATE TABLE employee (id INTEGER PRIMARY KEY, manager_id INTEGER REFERENCES employee(id));
             INSERT INTO employee VALUES (1, NULL), (2, 1), (3, 1);",
        );
        let edges: Vec<_> = g.foreign_keys.iter().map(edge).collect();
        assert_eq!(edges, vec![("employee.manager_id->employee.id".to_string(), KeyProvenance::Declared)]);
    }

    #[test]
    fn implicit_target_column_resolves_to_pk() {
        let g = graph(
            "CREATE TABLE district (district_id INTEGER PRIMARY KEY);
             CREATE TABLE client (client_id INTEGER PRIMARY KEY, home INTEGER REFERENCES district);
             INSERT INTO district VALUES (1);",
        );
        assert_eq!(g.foreign_keys[0].to_column, "district_id");
    }
}
