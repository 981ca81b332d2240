use std::path::Path;

use rusqlite::{params, Connection};

use crate::Lcg;

pub const FINANCIAL_TABLES: usize = 8;
pub const FINANCIAL_COLUMNS: usize = 55;

// client.district_id and loan.account_id carry no declared constraint; the
// key inference has to find them.
const DDL: &str = r#"
CREATE TABLE district (
    district_id INTEGER PRIMARY KEY,
    A2 TEXT NOT NULL, A3 TEXT NOT NULL, A4 TEXT NOT NULL, A5 TEXT, A6 TEXT, A7 TEXT,
    A8 INTEGER, A9 INTEGER, A10 REAL, A11 INTEGER, A12 REAL, A13 REAL, A14 INTEGER, A15 INTEGER, A16 INTEGER
);
CREATE TABLE account (
    account_id INTEGER PRIMARY KEY,
    district_id INTEGER NOT NULL REFERENCES district (district_id),
    frequency TEXT NOT NULL,
    date DATE NOT NULL
);
CREATE TABLE client (
    client_id INTEGER PRIMARY KEY,
    gender TEXT NOT NULL,
    birth_date DATE NOT NULL,
    district_id INTEGER NOT NULL
);
CREATE TABLE disp (
    disp_id INTEGER PRIMARY KEY,
    client_id INTEGER NOT NULL REFERENCES client (client_id),
    account_id INTEGER NOT NULL REFERENCES account (account_id),
    type TEXT NOT NULL
);
CREATE TABLE card (
    card_id INTEGER PRIMARY KEY,
    disp_id INTEGER NOT NULL REFERENCES disp (disp_id),
    type TEXT NOT NULL,
    issued DATE NOT NULL
);
CREATE TABLE loan (
    loan_id INTEGER PRIMARY KEY,
    account_id INTEGER NOT NULL,
    date DATE NOT NULL,
    amount INTEGER NOT NULL,
    duration INTEGER NOT NULL,
    payments REAL NOT NULL,
    status TEXT NOT NULL
);
CREATE TABLE "order" (
    order_id INTEGER PRIMARY KEY,
    account_id INTEGER NOT NULL REFERENCES account (account_id),
    bank_to TEXT NOT NULL,
    account_to INTEGER NOT NULL,
    amount REAL NOT NULL,
    k_symbol TEXT NOT NULL
);
CREATE TABLE trans (
    trans_id INTEGER PRIMARY KEY,
    account_id INTEGER NOT NULL REFERENCES account (account_id),
    date DATE NOT NULL,
    type TEXT NOT NULL,
    operation TEXT,
    amount INTEGER NOT NULL,
    balance INTEGER NOT NULL,
    k_symbol TEXT,
    bank TEXT,
    account INTEGER
);
"#;

const DISTRICTS: [(&str, &str); 20] = [
    ("Hl.m. Praha", "Prague"),
    ("Benesov", "central Bohemia"),
    ("Beroun", "central Bohemia"),
    ("Kladno", "central Bohemia"),
    ("Kolin", "central Bohemia"),
    ("Ceske Budejovice", "south Bohemia"),
    ("Cesky Krumlov", "south Bohemia"),
    ("Jindrichuv Hradec", "south Bohemia"),
    ("Pisek", "south Bohemia"),
    ("Plzen - mesto", "west Bohemia"),
    ("Cheb", "west Bohemia"),
    ("Karlovy Vary", "west Bohemia"),
    ("Liberec", "north Bohemia"),
    ("Usti nad Labem", "north Bohemia"),
    ("Hradec Kralove", "east Bohemia"),
    ("Pardubice", "east Bohemia"),
    ("Brno - mesto", "south Moravia"),
    ("Jihlava", "south Moravia"),
    ("Ostrava - mesto", "north Moravia"),
    ("Olomouc", "north Moravia"),
];

pub const ACCOUNTS: i64 = 60;
pub const CLIENTS: i64 = 80;

/// Creates the toy financial database at `path` (775 rows, fixed seed).
pub fn write_financial_db(path: &Path) {
    let _ = std::fs::remove_file(path);
    let conn = Connection::open(path).expect("fixture database opens");
    conn.execute_batch(DDL).expect("fixture schema");
    conn.execute_batch("BEGIN").unwrap();
    let mut rng = Lcg::new(7);

    for (i, (name, region)) in DISTRICTS.iter().enumerate() {
        let id = i as i64 + 1;
        let inhabitants = rng.range(40_000, 1_200_000);
        conn.execute(
            "INSERT INTO district VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12, ?13, ?14, ?15, ?16)",
            params![
                id,
                name,
                region,
                inhabitants.to_string(),
                rng.range(0, 80).to_string(),
                rng.range(0, 60).to_string(),
                rng.range(0, 20).to_string(),
                rng.range(0, 5),
                rng.range(1, 11),
                rng.range(330, 1000) as f64 / 10.0,
                rng.range(8_000, 12_500),
                rng.range(2, 70) as f64 / 10.0,
                rng.range(4, 95) as f64 / 10.0,
                rng.range(80, 170),
                rng.range(800, 85_000),
                rng.range(850, 99_000),
            ],
        )
        .unwrap();
    }

    let frequencies = ["POPLATEK MESICNE", "POPLATEK TYDNE", "POPLATEK PO OBRATU"];
    for id in 1..=ACCOUNTS {
        // every region gets at least one account
        let district = if id <= 20 { id } else { rng.range(1, 20) };
        let date = format!("{}-{:02}-{:02}", 1993 + (id % 5), rng.range(1, 12), rng.range(1, 28));
        conn.execute(
            "INSERT INTO account VALUES (?1, ?2, ?3, ?4)",
            params![id, district, rng.pick(&frequencies), date],
        )
        .unwrap();
    }

    for id in 1..=CLIENTS {
        let gender = if rng.next().is_multiple_of(2) { "F" } else { "M" };
        conn.execute(
            "INSERT INTO client VALUES (?1, ?2, ?3, ?4)",
            params![id, gender, rng.date(1920, 1987), rng.range(1, 20)],
        )
        .unwrap();
    }

    // clients 1..=60 own accounts 1..=60; clients 61..=80 are disponents
    for id in 1..=CLIENTS {
        let (account, kind) = if id <= ACCOUNTS {
            (id, "OWNER")
        } else {
            (rng.range(1, ACCOUNTS), "DISPONENT")
        };
        conn.execute("INSERT INTO disp VALUES (?1, ?2, ?3, ?4)", params![id, id, account, kind])
            .unwrap();
    }

    let card_types = ["classic", "junior", "gold"];
    for id in 1..=30 {
        conn.execute(
            "INSERT INTO card VALUES (?1, ?2, ?3, ?4)",
            params![id, id * 2, rng.pick(&card_types), rng.date(1994, 1998)],
        )
        .unwrap();
    }

    let statuses = ["A", "B", "C", "D"];
    for id in 1..=25 {
        let duration = [12, 24, 36, 48, 60][rng.range(0, 4) as usize];
        let amount = rng.range(5_000, 600_000);
        conn.execute(
            "INSERT INTO loan VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
            params![
                id,
                id * 2,
                rng.date(1993, 1998),
                amount,
                duration,
                (amount as f64 / duration as f64).round(),
                rng.pick(&statuses)
            ],
        )
        .unwrap();
    }

    let banks = ["AB", "CD", "EF", "GH", "IJ", "KL", "MN", "OP", "QR", "ST", "UV", "WX", "YZ"];
    let order_symbols = ["SIPO", "UVER", "POJISTNE", "LEASING"];
    for id in 1..=80 {
        conn.execute(
            "INSERT INTO \"order\" VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![
                id,
                rng.range(1, ACCOUNTS),
                rng.pick(&banks),
                rng.range(10_000_000, 99_999_999),
                rng.range(100, 150_000) as f64 / 10.0,
                rng.pick(&order_symbols)
            ],
        )
        .unwrap();
    }

    let kinds = [("PRIJEM", "VKLAD"), ("PRIJEM", "PREVOD Z UCTU"), ("VYDAJ", "VYBER"), ("VYDAJ", "PREVOD NA UCET"), ("VYBER", "VYBER KARTOU")];
    let symbols = ["SIPO", "UROK", "SLUZBY", "POJISTNE", "DUCHOD", "UVER"];
    for id in 1..=400 {
        let (kind, op) = kinds[rng.range(0, 4) as usize];
        let transfer = op.starts_with("PREVOD");
        let symbol = if rng.next().is_multiple_of(3) { None } else { Some(rng.pick(&symbols)) };
        let bank = transfer.then(|| rng.pick(&banks));
        let account = transfer.then(|| rng.range(10_000_000, 99_999_999));
        conn.execute(
            "INSERT INTO trans VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)",
            params![
                id,
                rng.range(1, ACCOUNTS),
                rng.date(1993, 1998),
                kind,
                op,
                rng.range(10, 60_000),
                rng.range(200, 120_000),
                symbol,
                bank,
                account
            ],
        )
        .unwrap();
    }
    conn.execute_batch("COMMIT").unwrap();
}

/// Read-only questions over the financial schema, written in the style of
/// the benchmark's gold SQL (aliases T1/T2, STRFTIME, CAST ratios, nested
/// selects, backticks and double-quoted identifiers).
pub const FINANCIAL_GOLD: &[&str] = &[
    "SELECT COUNT(account_id) FROM account WHERE STRFTIME('%Y', date) = '1997'",
    "SELECT COUNT(T2.client_id) FROM district AS T1 INNER JOIN client AS T2 ON T1.district_id = T2.district_id WHERE T2.gender = 'F' AND T1.A3 = 'south Bohemia'",
    "SELECT T1.account_id FROM account AS T1 INNER JOIN loan AS T2 ON T1.account_id = T2.account_id WHERE STRFTIME('%Y', T2.date) = '1997' ORDER BY T2.amount ASC LIMIT 1",
    "SELECT CAST(SUM(T1.gender = 'M') AS REAL) * 100 / COUNT(T1.client_id) FROM client AS T1 INNER JOIN district AS T2 ON T1.district_id = T2.district_id WHERE T2.A3 = 'north Moravia'",
    "SELECT T2.A2, T2.A3 FROM account AS T1 INNER JOIN district AS T2 ON T1.district_id = T2.district_id WHERE T1.account_id = 12",
    "SELECT COUNT(T1.account_id) FROM account AS T1 INNER JOIN district AS T2 ON T1.district_id = T2.district_id WHERE T2.A2 = 'Pisek'",
    "SELECT DISTINCT T2.district_id FROM trans AS T1 INNER JOIN account AS T2 ON T1.account_id = T2.account_id WHERE STRFTIME('%Y', T1.date) = '1997' AND T1.amount > 10000",
    "SELECT T1.gender FROM client AS T1 INNER JOIN district AS T2 ON T1.district_id = T2.district_id ORDER BY T2.A11 DESC, T1.birth_date ASC LIMIT 1",
    "SELECT T1.type FROM card AS T1 INNER JOIN disp AS T2 ON T1.disp_id = T2.disp_id WHERE T2.client_id = 4",
    "SELECT COUNT(T1.client_id) FROM client AS T1 INNER JOIN disp AS T2 ON T1.client_id = T2.client_id WHERE T2.type = 'OWNER' AND T1.gender = 'F' AND STRFTIME('%Y', T1.birth_date) < '1950'",
    "SELECT T3.A2 FROM loan AS T1 INNER JOIN account AS T2 ON T1.account_id = T2.account_id INNER JOIN district AS T3 ON T2.district_id = T3.district_id WHERE T1.status = 'D' GROUP BY T3.A2 ORDER BY COUNT(T1.loan_id) DESC LIMIT 1",
    "SELECT AVG(amount) FROM loan WHERE status IN ('C', 'D') AND duration = 24",
    "SELECT CAST((SUM(CASE WHEN STRFTIME('%Y', date) = '1997' THEN amount ELSE 0 END) - SUM(CASE WHEN STRFTIME('%Y', date) = '1996' THEN amount ELSE 0 END)) AS REAL) * 100 / SUM(CASE WHEN STRFTIME('%Y', date) = '1996' THEN amount ELSE 0 END) FROM loan",
    "SELECT account_id FROM trans WHERE operation = 'VYBER KARTOU' AND STRFTIME('%Y', date) = '1998' GROUP BY account_id HAVING COUNT(trans_id) > 1",
    "SELECT T1.client_id, T1.birth_date FROM client AS T1 INNER JOIN disp AS T2 ON T1.client_id = T2.client_id INNER JOIN card AS T3 ON T2.disp_id = T3.disp_id WHERE T3.type = 'gold'",
    "SELECT SUM(amount) FROM `order` WHERE k_symbol = 'SIPO'",
    "SELECT COUNT(*) FROM \"order\" AS T1 INNER JOIN account AS T2 ON T1.account_id = T2.account_id WHERE T2.frequency = 'POPLATEK TYDNE'",
    "SELECT T1.account_id, T1.frequency FROM account AS T1 WHERE T1.account_id IN (SELECT account_id FROM loan WHERE amount > 300000)",
    "SELECT district_id FROM district WHERE A13 > A12 ORDER BY A13 - A12 DESC LIMIT 5",
    "WITH yearly AS (SELECT account_id, STRFTIME('%Y', date) AS y, SUM(amount) AS total FROM trans GROUP BY account_id, y) SELECT y, MAX(total) FROM yearly GROUP BY y ORDER BY y",
    "SELECT T1.A2, COUNT(T2.account_id) AS n FROM district AS T1 LEFT JOIN account AS T2 ON T1.district_id = T2.district_id GROUP BY T1.A2 ORDER BY n DESC, T1.A2",
    "SELECT CAST(COUNT(CASE WHEN type = 'PRIJEM' THEN trans_id END) AS REAL) / COUNT(trans_id) FROM trans WHERE account_id = 3",
    "SELECT T2.balance FROM account AS T1 INNER JOIN trans AS T2 ON T1.account_id = T2.account_id WHERE T1.account_id = 7 ORDER BY T2.date DESC LIMIT 1",
    "SELECT COUNT(DISTINCT T2.account_id) FROM disp AS T1 INNER JOIN account AS T2 ON T1.account_id = T2.account_id WHERE T1.type = 'DISPONENT'",
    "SELECT T1.loan_id, T1.payments FROM loan AS T1 WHERE T1.duration = 60 AND T1.status = 'A' ORDER BY T1.payments DESC",
    "SELECT A3, SUM(A16) FROM district GROUP BY A3 HAVING SUM(A16) > 10000",
    "SELECT T1.client_id FROM client AS T1 WHERE T1.client_id NOT IN (SELECT client_id FROM disp WHERE type = 'OWNER')",
    "SELECT bank_to FROM `order` UNION SELECT bank FROM trans WHERE bank IS NOT NULL",
    "SELECT IIF(amount > 100000, 'large', 'small') AS size, COUNT(*) FROM loan GROUP BY size",
    "SELECT STRFTIME('%m', issued) AS month, COUNT(card_id) FROM card WHERE type = 'classic' GROUP BY month ORDER BY month",
    "SELECT T1.district_id, T1.A4 FROM district AS T1 WHERE CAST(T1.A4 AS INTEGER) > 500000",
    "SELECT MIN(T1.birth_date), MAX(T1.birth_date) FROM client AS T1 INNER JOIN disp AS T2 ON T1.client_id = T2.client_id WHERE T2.type = 'DISPONENT'",
    "SELECT T1.account_id FROM account AS T1 WHERE EXISTS (SELECT 1 FROM card AS C INNER JOIN disp AS D ON C.disp_id = D.disp_id WHERE D.account_id = T1.account_id) LIMIT 10",
    "SELECT k_symbol, AVG(amount) FROM trans WHERE k_symbol IS NOT NULL AND k_symbol <> '' GROUP BY k_symbol",
    "SELECT T1.A2 FROM district AS T1 INNER JOIN client AS T2 ON T1.district_id = T2.district_id WHERE T2.gender = 'M' GROUP BY T1.A2 HAVING COUNT(*) >= 3 ORDER BY T1.A2",
];
