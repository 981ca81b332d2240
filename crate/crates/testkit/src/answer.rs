use std::path::Path;

use rusqlite::Connection;

/// One table, one row: `answer(id, value)` holding 42.
pub fn write_answer_db(path: &Path) {
    let conn = Connection::open(path).expect("fixture database");
    conn.execute_batch(
        "CREATE TABLE answer (id INTEGER PRIMARY KEY, value INTEGER NOT NULL);
         INSERT INTO answer VALUES (1, 42);",
    )
    .expect("fixture schema");
}

/// Sticky replies: every question about the answer database is solved on the
/// first attempt with `SELECT value FROM answer`.
pub const ANSWER_SCRIPT: &str = r#">>>* [DESCRIBE]
{"table": "Holds the single stored answer.", "columns": {"value": "The answer."}}
>>>* [FACT_SHEET]
{"required_tables": ["answer"], "metrics": ["value"]}
>>>* [DECIDE]
EMIT
>>>* [EMIT]
```sql
SELECT value FROM answer
```
"#;

/// A single session that fails twice in the fast loop, then is solved by the
/// generator: attempt modes fast, fast, slow.
pub const ANSWER_ESCALATION_SCRIPT: &str = r#">>>* [DESCRIBE]
{"table": "Holds the single stored answer.", "columns": {}}
>>> [FACT_SHEET]
{"required_tables": ["answer"], "metrics": ["value"]}
>>> [DECIDE]
EMIT
>>> [EMIT]
```sql
SELECT value FROM answers
```
>>> [DECIDE]
EMIT
>>> [EMIT]
```sql
SELECT valu FROM answer
```
>>> [GENERATE]
```sql
SELECT value FROM answer
```
"#;
