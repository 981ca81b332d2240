use std::path::Path;

use rusqlite::Connection;

/// (table, column, description) for a 20-column schema spread over four
/// tables of a small retail database.
pub const CORPUS_COLUMNS: [(&str, &str, &str); 20] = [
    ("customer", "customer_id", "unique identifier of the customer"),
    ("customer", "full_name", "first and last name of the customer"),
    ("customer", "city", "city where the customer lives"),
    ("customer", "signup_date", "date the customer registered an account"),
    ("customer", "loyalty_tier", "bronze silver or gold membership level"),
    ("product", "product_id", "unique identifier of the product"),
    ("product", "title", "product name shown in the catalogue"),
    ("product", "category", "department such as books toys or garden"),
    ("product", "unit_price", "list price of one unit in euros"),
    ("product", "stock", "units currently held in the warehouse"),
    ("purchase", "purchase_id", "unique identifier of the purchase"),
    ("purchase", "customer_id", "customer who placed the purchase"),
    ("purchase", "product_id", "product that was bought"),
    ("purchase", "quantity", "number of units bought"),
    ("purchase", "purchased_at", "timestamp of the checkout"),
    ("review", "review_id", "unique identifier of the review"),
    ("review", "product_id", "product the review is about"),
    ("review", "stars", "rating from one to five stars"),
    ("review", "body", "free text opinion written by the customer"),
    ("review", "helpful_votes", "count of readers who found the review helpful"),
];

/// Creates the four tables (a few rows each) at `path`.
pub fn write_retrieval_corpus(path: &Path) {
    let _ = std::fs::remove_file(path);
    let conn = Connection::open(path).expect("fixture database opens");
    let mut ddl = String::new();
    let mut table = "";
    for (t, c, _) in CORPUS_COLUMNS {
        if t != table {
            if !table.is_empty() {
                ddl.push_str(");\n");
            }
            ddl.push_str(&format!("CREATE TABLE {t} ({c}"));
            table = t;
        } else {
            ddl.push_str(&format!(", {c}"));
        }
    }
    ddl.push_str(");\n");
    ddl.push_str(
        "INSERT INTO customer VALUES (1, 'Ana Novak', 'Brno', '2021-03-01', 'gold'), (2, 'Petr Svoboda', 'Praha', '2022-07-15', 'bronze');
         INSERT INTO product VALUES (1, 'Garden hose', 'garden', 19.9, 40), (2, 'Picture book', 'books', 9.5, 120);
         INSERT INTO purchase VALUES (1, 1, 2, 3, '2023-01-04 10:00:00'), (2, 2, 1, 1, '2023-02-11 16:30:00');
         INSERT INTO review VALUES (1, 2, 5, 'Lovely drawings', 4), (2, 1, 2, 'Leaks at the tap', 9);",
    );
    conn.execute_batch(&ddl).expect("corpus schema");
}
