use std::collections::BTreeSet;
use std::fmt::Write as _;

use regex::Regex;

use super::{ColumnRef, EnrichedSchema, SchemaError};
use crate::prompts::one_line;

fn quote(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn renderable_type(declared: &str) -> Option<&str> {
    static TYPE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    let re = TYPE.get_or_init(|| Regex::new(r"^[A-Za-z][A-Za-z0-9_]*( [A-Za-z][A-Za-z0-9_]*)*( ?\(\s*\d+\s*(,\s*\d+\s*)?\))?$").unwrap());
    let t = declared.trim();
    re.is_match(t).then_some(t)
}

fn comment(text: &str) -> String {
    one_line(text)
}

/// Renders one `CREATE TABLE` block per selected table, in table order.
///
/// Each column line carries its description as a trailing `--` comment and
/// the table description precedes the block. With a selection, only the
/// named columns appear; the primary key line is kept when all of its
/// columns are selected and foreign key lines when their referencing column
/// is.
pub fn render_ddl(schema: &EnrichedSchema, selection: Option<&BTreeSet<ColumnRef>>) -> Result<String, SchemaError> {
    if let Some(sel) = selection {
        if let Some(unknown) = sel.iter().find(|c| !schema.has_column(c)) {
            return Err(SchemaError::UnknownSelection(unknown.clone()));
        }
    }
    let mut blocks = Vec::new();
    for table in schema.tables() {
        let columns: Vec<&str> = schema
            .columns_of(table)
            .filter(|p| selection.is_none_or(|s| s.contains(&p.column_ref())))
            .map(|p| p.column.as_str())
            .collect();
        if columns.is_empty() {
            continue;
        }
        blocks.push(render_table_ddl(schema, table, &columns));
    }
    Ok(blocks.join("\n\n"))
}

/// One `CREATE TABLE` block restricted to `columns`.
pub fn render_table_ddl(schema: &EnrichedSchema, table: &str, columns: &[&str]) -> String {
    let mut lines: Vec<(String, Option<String>)> = Vec::new();
    for p in schema.columns_of(table).filter(|p| columns.contains(&p.column.as_str())) {
        let def = match renderable_type(&p.declared_type) {
            Some(t) => format!("{} {t}", quote(&p.column)),
            None => quote(&p.column),
        };
        let desc = comment(schema.column_description(table, &p.column));
        lines.push((def, (!desc.is_empty()).then_some(desc)));
    }
    let pk = schema.keys.primary_key(table);
    if !pk.is_empty() && pk.iter().all(|c| columns.contains(&c.as_str())) {
        let cols: Vec<String> = pk.iter().map(|c| quote(c)).collect();
        lines.push((format!("PRIMARY KEY ({})", cols.join(", ")), None));
    }
    for fk in schema.keys.foreign_keys.iter().filter(|fk| fk.from_table == table) {
        if !columns.contains(&fk.from_column.as_str()) {
            continue;
        }
        lines.push((
            format!(
                "FOREIGN KEY ({}) REFERENCES {}({})",
                quote(&fk.from_column),
                quote(&fk.to_table),
                quote(&fk.to_column)
            ),
            Some(format!("{:?}", fk.provenance).to_lowercase()),
        ));
    }

    let mut out = String::new();
    let desc = comment(schema.table_description(table));
    if !desc.is_empty() {
        let _ = writeln!(out, "-- {desc}");
    }
    let _ = writeln!(out, "CREATE TABLE {} (", quote(table));
    let n = lines.len();
    for (i, (def, note)) in lines.into_iter().enumerate() {
        let sep = if i + 1 < n { "," } else { "" };
        match note {
            Some(note) => {
                let _ = writeln!(out, "  {def}{sep} -- {note}");
            }
            None => {
                let _ = writeln!(out, "  {def}{sep}");
            }
        }
    }
    out.push_str(");");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ColumnProfile, ForeignKey, KeyGraph, KeyProvenance};
    use crate::sql::{validate_script, DEFAULT_DIALECT};

    fn profile(table: &str, column: &str, ordinal: usize, ty: &str) -> ColumnProfile {
        ColumnProfile {
            table: table.into(),
            column: column.into(),
            ordinal,
            declared_type: ty.into(),
            null_count: 0,
            distinct_count: 1,
            example_values: vec![],
            row_count: 1,
        }
    }

    fn schema() -> EnrichedSchema {
        let mut keys = KeyGraph::default();
        keys.primary_keys.insert("client".into(), vec!["client_id".into()]);
        keys.primary_keys.insert("disp".into(), vec!["disp_id".into()]);
        keys.foreign_keys.push(ForeignKey {
            from_table: "disp".into(),
            from_column: "client_id".into(),
            to_table: "client".into(),
            to_column: "client_id".into(),
            provenance: KeyProvenance::Declared,
        });
        let mut s = EnrichedSchema::new(
            "bank",
            "sqlite",
            vec![
                profile("client", "client_id", 0, "INTEGER"),
                profile("client", "gender", 1, "TEXT"),
                profile("disp", "disp_id", 0, "INTEGER"),
                profile("disp", "client_id", 1, "INTEGER"),
                profile("disp", "type", 2, "weird type!"),
                profile("order", "order_id", 0, "VARCHAR(10)"),
            ],
            keys,
        );
        s.column_descriptions.get_mut("client").unwrap().insert("client_id".into(), "client id".into());
        s.column_descriptions
            .get_mut("client")
            .unwrap()
            .insert("gender".into(), "F or M;\nsecond line -- with dashes".into());
        s.table_descriptions.insert("client".into(), "Bank clients".into());
        s
    }

    #[test]
    fn inline_comment_follows_definition() {
        let ddl = render_ddl(&schema(), None).unwrap();
        assert!(ddl.contains("\"client_id\" INTEGER, -- client id"), "{ddl}");
        assert!(ddl.contains("-- Bank clients\nCREATE TABLE \"client\""));
        assert!(ddl.contains("FOREIGN KEY (\"client_id\") REFERENCES \"client\"(\"client_id\") -- declared"));
    }

    #[test]
    fn selection_filters_tables() {
        let sel: BTreeSet<ColumnRef> = [ColumnRef::new("client", "gender"), ColumnRef::new("order", "order_id")].into();
        let ddl = render_ddl(&schema(), Some(&sel)).unwrap();
        assert_eq!(ddl.matches("CREATE TABLE").count(), 2);
        assert!(!ddl.contains("PRIMARY KEY (\"client_id\")"));
    }

    #[test]
    fn unknown_selection() {
        let sel: BTreeSet<ColumnRef> = [ColumnRef::new("nope", "x")].into();
        assert!(matches!(render_ddl(&schema(), Some(&sel)), Err(SchemaError::UnknownSelection(_))));
    }

    #[test]
    fn round_trips_through_parser() {
        let ddl = render_ddl(&schema(), None).unwrap();
        assert_eq!(validate_script(&ddl, DEFAULT_DIALECT).unwrap(), 3, "{ddl}");
        assert_eq!(ddl, render_ddl(&schema(), None).unwrap());
    }
}
