use std::fmt;

use serde::{Deserialize, Serialize};

/// A single SQL value as returned by the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl Scalar {
    pub fn is_null(&self) -> bool {
        matches!(self, Scalar::Null)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Null => f.write_str("NULL"),
            Scalar::Integer(v) => write!(f, "{v}"),
            Scalar::Real(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 => write!(f, "{v:.1}"),
            Scalar::Real(v) => write!(f, "{v}"),
            Scalar::Text(s) => f.write_str(s),
            Scalar::Blob(b) => {
                f.write_str("x'")?;
                for byte in b {
                    write!(f, "{byte:02x}")?;
                }
                f.write_str("'")
            }
        }
    }
}

/// Executed query output with column headers.
///
/// `rows` holds at most `row_limit_applied` rows. `row_count` is the number of
/// rows the engine observed while scanning, which may exceed `rows.len()` when
/// the result was clipped (`truncated == true`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<Scalar>>,
    pub truncated: bool,
    pub row_limit_applied: Option<u64>,
    pub row_count: u64,
}

impl ResultTable {
    pub fn new(column_names: Vec<String>, rows: Vec<Vec<Scalar>>) -> Self {
        let row_count = rows.len() as u64;
        Self {
            column_names,
            rows,
            truncated: false,
            row_limit_applied: None,
            row_count,
        }
    }

    /// True when every row has exactly one entry per column.
    pub fn is_well_formed(&self) -> bool {
        self.rows.iter().all(|r| r.len() == self.column_names.len())
    }
}
