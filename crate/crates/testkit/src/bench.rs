use std::path::Path;

use crate::financial::write_financial_db;

/// (question id, question, evidence, gold SQL) of the toy benchmark.
pub const TOY_ITEMS: [(u32, &str, &str, &str); 3] = [
    (
        0,
        "How many accounts were opened in 1997?",
        "opened in 1997 refers to STRFTIME('%Y', account.date) = '1997'",
        "SELECT COUNT(account_id) FROM account WHERE STRFTIME('%Y', date) = '1997'",
    ),
    (
        1,
        "What is the gender of the oldest client?",
        "oldest client refers to the smallest birth_date",
        "SELECT gender FROM client ORDER BY birth_date ASC LIMIT 1",
    ),
    (
        2,
        "How many loans have status A?",
        "",
        "SELECT COUNT(loan_id) FROM loan WHERE status = 'A'",
    ),
];

/// Writes `dev.json` and `dev_databases/financial/financial.sqlite` under `root`.
pub fn write_toy_benchmark(root: &Path) {
    let db_dir = root.join("dev_databases").join("financial");
    std::fs::create_dir_all(&db_dir).expect("benchmark directory");
    write_financial_db(&db_dir.join("financial.sqlite"));
    let items: Vec<serde_json::Value> = TOY_ITEMS
        .iter()
        .map(|(id, q, e, sql)| {
            serde_json::json!({
                "question_id": id,
                "db_id": "financial",
                "question": q,
                "evidence": e,
                "SQL": sql,
                "difficulty": "simple",
            })
        })
        .collect();
    std::fs::write(root.join("dev.json"), serde_json::to_string_pretty(&items).unwrap()).expect("question file");
}

/// Replies for one pass over the toy benchmark, consumed in order:
/// item 0 is answered on the first attempt; item 1 runs but answers the
/// wrong question; item 2 fails twice in the fast loop and is solved by the
/// generator.
pub const TOY_BENCH_SCRIPT: &str = r#"# toy benchmark, one trial
>>>* [DESCRIBE]
{"table": "Banking records of a Czech bank.", "columns": {}}
>>> [FACT_SHEET]
{"required_tables": ["account"], "filters": ["STRFTIME('%Y', account.date) = '1997'"], "metrics": ["COUNT(account_id)"]}
>>> [DECIDE]
EMIT
>>> [EMIT]
```sql
SELECT COUNT(account_id) FROM account WHERE STRFTIME('%Y', date) = '1997'
```
>>> [JUDGE]
{"Classification code": "RES3", "Reasoning": "Both answers hold the same single count."}
>>> [FACT_SHEET]
{"required_tables": ["client"], "metrics": ["gender of the client with the smallest birth_date"]}
>>> [DECIDE]
EMIT
>>> [EMIT]
```sql
SELECT gender FROM client ORDER BY birth_date DESC LIMIT 1
```
>>> [JUDGE]
{"Classification code": "RES2", "Reasoning": "The generated query picks the youngest client."}
>>> [FACT_SHEET]
{"required_tables": ["loan"], "filters": ["loan.status = 'A'"], "metrics": ["COUNT(loan_id)"]}
>>> [DECIDE]
EMIT
>>> [EMIT]
```sql
SELECT COUNT(*) FROM loans WHERE status = 'A'
```
>>> [DECIDE]
EMIT
>>> [EMIT]
```sql
SELECT COUNT(*) FROM loan WHERE state = 'A'
```
>>> [GENERATE]
The status column holds single letters.
```sql
SELECT COUNT(loan_id) FROM loan WHERE status = 'A'
```
>>> [JUDGE]
{"Classification code": "RES3", "Reasoning": "Counts match."}
"#;
