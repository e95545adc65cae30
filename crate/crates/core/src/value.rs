use std::fmt;

use serde::{Deserialize, Serialize};

/// A single SQL value as exchanged with the database engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SqlValue {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
}

impl SqlValue {
    pub fn is_null(&self) -> bool {
        matches!(self, SqlValue::Null)
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            SqlValue::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Key used for order-independent bookkeeping of distinct values.
    pub fn key(&self) -> String {
        match self {
            SqlValue::Null => "n:".to_string(),
            SqlValue::Integer(i) => format!("i:{i}"),
            SqlValue::Real(r) => format!("r:{}", r.to_bits()),
            SqlValue::Text(s) => format!("t:{s}"),
        }
    }
}

/// Canonical decimal rendering: integers without a fractional part, reals
/// in their shortest round-trip form, text verbatim.
impl fmt::Display for SqlValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SqlValue::Null => f.write_str("NULL"),
            SqlValue::Integer(i) => write!(f, "{i}"),
            SqlValue::Real(r) => write!(f, "{r}"),
            SqlValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for SqlValue {
    fn from(v: i64) -> Self {
        SqlValue::Integer(v)
    }
}

impl From<f64> for SqlValue {
    fn from(v: f64) -> Self {
        SqlValue::Real(v)
    }
}

impl From<&str> for SqlValue {
    fn from(v: &str) -> Self {
        SqlValue::Text(v.to_string())
    }
}

impl From<String> for SqlValue {
    fn from(v: String) -> Self {
        SqlValue::Text(v)
    }
}

/// Rows returned by a statement.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<SqlValue>>,
}

impl ResultSet {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// All values of all rows, row-major.
    pub fn values(&self) -> impl Iterator<Item = &SqlValue> {
        self.rows.iter().flatten()
    }

    /// Rows sorted by their value keys, for multiset comparison.
    pub fn sorted_rows(&self) -> Vec<Vec<SqlValue>> {
        let mut rows = self.rows.clone();
        rows.sort_by_cached_key(|r| r.iter().map(SqlValue::key).collect::<Vec<_>>());
        rows
    }
}
