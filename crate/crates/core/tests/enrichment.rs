mod common;

use std::collections::BTreeSet;

use ledgersql_core::schema::{load_metadata, render_ddl, save_metadata, KeyProvenance};
use ledgersql_core::sql::validate_script;
use ledgersql_testkit::{FINANCIAL_COLUMNS, FINANCIAL_TABLES};
use rusqlite::Connection;

use common::{count, q};

#[test]
fn shape_matches_financial_layout() {
    let f = common::financial();
    assert_eq!(f.schema.tables().len(), FINANCIAL_TABLES);
    assert_eq!(f.schema.profiles.len(), FINANCIAL_COLUMNS);
    let conn = Connection::open(&f.db_path).unwrap();
    let rows: u64 = f.schema.tables().iter().map(|t| count(&conn, &format!("SELECT COUNT(*) FROM {}", q(t)))).sum();
    assert!(rows <= 1000, "{rows} rows");
}

#[test]
fn profiles_match_brute_force_counts() {
    let f = common::financial();
    let conn = Connection::open(&f.db_path).unwrap();
    for p in &f.schema.profiles {
        let (t, c) = (q(&p.table), q(&p.column));
        assert_eq!(p.row_count, count(&conn, &format!("SELECT COUNT(*) FROM {t}")), "{}", p.column_ref());
        assert_eq!(p.null_count, count(&conn, &format!("SELECT COUNT(*) FROM {t} WHERE {c} IS NULL")), "{}", p.column_ref());
        let distinct: BTreeSet<String> = conn
            .prepare(&format!("SELECT quote({c}) FROM {t} WHERE {c} IS NOT NULL"))
            .unwrap()
            .query_map([], |r| r.get::<_, String>(0))
            .unwrap()
            .map(Result::unwrap)
            .collect();
        assert_eq!(p.distinct_count, distinct.len() as u64, "{}", p.column_ref());
        assert!(p.example_values.len() <= 3);
    }
}

#[test]
fn inferred_keys_match_containment_oracle() {
    let f = common::financial();
    let conn = Connection::open(&f.db_path).unwrap();
    let keys = &f.schema.keys;
    let declared: BTreeSet<(String, String)> = keys
        .foreign_keys
        .iter()
        .filter(|k| k.provenance == KeyProvenance::Declared)
        .map(|k| (k.from_table.clone(), k.from_column.clone()))
        .collect();
    let sole_pk: BTreeSet<(String, String)> = keys
        .primary_keys
        .iter()
        .filter(|(_, cols)| cols.len() == 1)
        .map(|(t, cols)| (t.clone(), cols[0].clone()))
        .collect();
    let inferred: BTreeSet<String> = keys
        .foreign_keys
        .iter()
        .filter(|k| k.provenance == KeyProvenance::Inferred)
        .map(|k| format!("{}.{}->{}.{}", k.from_table, k.from_column, k.to_table, k.to_column))
        .collect();
    assert_eq!(inferred, common::containment_oracle(&conn, &f.schema.profiles, &declared, &sole_pk));
    // the two undeclared relationships of the fixture
    assert!(inferred.contains("client.district_id->district.district_id"));
    assert!(inferred.contains("loan.account_id->account.account_id"));
    assert_eq!(declared.len(), 6);
}

#[test]
fn rendered_ddl_round_trips_through_the_parser() {
    let f = common::financial();
    let ddl = render_ddl(&f.schema, None).unwrap();
    assert_eq!(validate_script(&ddl, "sqlite").unwrap(), FINANCIAL_TABLES);
    let dir = tempfile::tempdir().unwrap();
    let conn = Connection::open(dir.path().join("copy.sqlite")).unwrap();
    conn.execute_batch(&ddl).unwrap();
    let n: i64 = conn.query_row("SELECT COUNT(*) FROM pragma_table_list WHERE name NOT LIKE 'sqlite_%'", [], |r| r.get(0)).unwrap();
    assert_eq!(n as usize, FINANCIAL_TABLES);
}

#[test]
fn metadata_artifact_round_trip() {
    let f = common::financial();
    let path = f.dir.path().join("financial.metadata.json");
    save_metadata(&f.schema, &path).unwrap();
    let loaded = load_metadata(&path).unwrap();
    assert_eq!(loaded, f.schema);
    assert!(loaded.descriptions_complete);
    assert_eq!(loaded.table_description("loan"), "Banking records.");
}
