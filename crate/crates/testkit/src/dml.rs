/// The nine write verbs, each as one plain statement against the financial schema.
pub const DML_VERBS: [(&str, &str); 9] = [
    ("insert", "INSERT INTO loan (loan_id, account_id, date, amount, duration, payments, status) VALUES (999, 2, '1998-01-01', 1000, 12, 83.0, 'A')"),
    ("update", "UPDATE loan SET amount = 0 WHERE loan_id = 1"),
    ("delete", "DELETE FROM trans WHERE amount > 0"),
    ("merge", "MERGE INTO loan USING account ON loan.account_id = account.account_id WHEN MATCHED THEN UPDATE SET amount = 0"),
    ("create", "CREATE TABLE stolen AS SELECT * FROM client"),
    ("alter", "ALTER TABLE client ADD COLUMN note TEXT"),
    ("drop", "DROP TABLE loan"),
    ("truncate", "TRUNCATE TABLE trans"),
    ("replace", "REPLACE INTO card (card_id, disp_id, type, issued) VALUES (1, 2, 'gold', '1998-01-01')"),
];

pub const DML_VARIANTS: [&str; 5] = ["plain", "cte_wrapped", "compound", "mixed_case", "comment_prefixed"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DmlCase {
    pub verb: &'static str,
    pub variant: &'static str,
    pub sql: String,
}

fn mixed_case(sql: &str) -> String {
    let mut upper = false;
    let mut in_quote = false;
    sql.chars()
        .map(|c| {
            if c == '\'' {
                in_quote = !in_quote;
            }
            if in_quote || !c.is_ascii_alphabetic() {
                return c;
            }
            upper = !upper;
            if upper {
                c.to_ascii_uppercase()
            } else {
                c.to_ascii_lowercase()
            }
        })
        .collect()
}

/// 9 verbs × 5 disguises = 45 statements that must all be refused.
pub fn dml_corpus() -> Vec<DmlCase> {
    let mut out = Vec::with_capacity(45);
    for (verb, sql) in DML_VERBS {
        for variant in DML_VARIANTS {
            let sql = match variant {
                "plain" => sql.to_string(),
                "cte_wrapped" => format!("WITH recent AS (SELECT account_id FROM account WHERE date > '1997-01-01') {sql}"),
                "compound" => format!("SELECT COUNT(*) FROM account; {sql}"),
                "mixed_case" => mixed_case(sql),
                _ => format!("/* read-only report */\n-- SELECT 1\n{sql}"),
            };
            out.push(DmlCase { verb, variant, sql });
        }
    }
    out
}
