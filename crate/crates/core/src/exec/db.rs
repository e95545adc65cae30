//! Database adapter boundary and the embedded-engine implementation.

use std::path::Path;

use rusqlite::types::{Value, ValueRef};
use rusqlite::Connection;

use crate::error::{Error, Result};
use crate::sql::quote_ident;
use crate::value::{ResultSet, SqlValue};

/// What the executor needs from an engine. Implementations run statements
/// one at a time on a single connection.
pub trait Database {
    fn query(&self, sql: &str) -> Result<ResultSet>;

    /// Runs one or more statements that return no rows.
    fn execute(&self, sql: &str) -> Result<()>;

    /// Creates a session-scoped table with untyped columns and fills it.
    fn create_temp_table(&self, name: &str, columns: &[&str], rows: &[Vec<SqlValue>]) -> Result<()>;

    /// Creates a session-scoped table holding the rows of `select_sql`.
    fn create_temp_table_as(&self, name: &str, select_sql: &str) -> Result<()> {
        self.execute(&format!("CREATE TEMP TABLE {} AS {select_sql}", quote_ident(name)))
    }

    fn drop_table(&self, name: &str) -> Result<()> {
        self.execute(&format!("DROP TABLE IF EXISTS {}", quote_ident(name)))
    }

    /// Column names of `table`, or `None` when no such table exists.
    fn table_columns(&self, table: &str) -> Result<Option<Vec<String>>>;

    /// Every table visible on the connection, temporary ones included.
    fn table_names(&self) -> Result<Vec<String>>;

    fn distinct_values(&self, table: &str, column: &str) -> Result<Vec<SqlValue>> {
        let rs = self.query(&format!(
            "SELECT DISTINCT {c} FROM {t} WHERE {c} IS NOT NULL",
            c = quote_ident(column),
            t = quote_ident(table)
        ))?;
        Ok(rs.rows.into_iter().filter_map(|r| r.into_iter().next()).collect())
    }
}

pub struct SqliteDatabase {
    conn: Connection,
}

fn to_sql(v: &SqlValue) -> Value {
    match v {
        SqlValue::Null => Value::Null,
        SqlValue::Integer(i) => Value::Integer(*i),
        SqlValue::Real(r) => Value::Real(*r),
        SqlValue::Text(s) => Value::Text(s.clone()),
    }
}

fn from_sql(v: ValueRef<'_>) -> SqlValue {
    match v {
        ValueRef::Null => SqlValue::Null,
        ValueRef::Integer(i) => SqlValue::Integer(i),
        ValueRef::Real(r) => SqlValue::Real(r),
        ValueRef::Text(t) => SqlValue::Text(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => SqlValue::Text(String::from_utf8_lossy(b).into_owned()),
    }
}

impl SqliteDatabase {
    pub fn open(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Database(format!("database file {} does not exist", path.display())));
        }
        Ok(SqliteDatabase {
            conn: Connection::open(path)?,
        })
    }

    pub fn open_in_memory() -> Result<Self> {
        Ok(SqliteDatabase {
            conn: Connection::open_in_memory()?,
        })
    }

    /// In-memory database initialised by a script of statements.
    pub fn from_script(sql: &str) -> Result<Self> {
        let db = Self::open_in_memory()?;
        db.execute(sql)?;
        Ok(db)
    }

    pub fn connection(&self) -> &Connection {
        &self.conn
    }
}

impl Database for SqliteDatabase {
    fn query(&self, sql: &str) -> Result<ResultSet> {
        let mut stmt = self.conn.prepare(sql)?;
        let columns: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
        let n = columns.len();
        let mut rows = Vec::new();
        let mut cursor = stmt.query([])?;
        while let Some(row) = cursor.next()? {
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                out.push(from_sql(row.get_ref(i)?));
            }
            rows.push(out);
        }
        Ok(ResultSet { columns, rows })
    }

    fn execute(&self, sql: &str) -> Result<()> {
        self.conn.execute_batch(sql)?;
        Ok(())
    }

    fn create_temp_table(&self, name: &str, columns: &[&str], rows: &[Vec<SqlValue>]) -> Result<()> {
        let cols: Vec<String> = columns.iter().map(|c| quote_ident(c)).collect();
        self.execute(&format!(
            "CREATE TEMP TABLE {} ({})",
            quote_ident(name),
            cols.join(", ")
        ))?;
        let placeholders = vec!["?"; columns.len()].join(", ");
        let mut stmt = self.conn.prepare(&format!(
            "INSERT INTO {} VALUES ({placeholders})",
            quote_ident(name)
        ))?;
        for row in rows {
            let values: Vec<Value> = row.iter().map(to_sql).collect();
            stmt.execute(rusqlite::params_from_iter(values))?;
        }
        Ok(())
    }

    fn table_columns(&self, table: &str) -> Result<Option<Vec<String>>> {
        let rs = self.query(&format!("PRAGMA table_info({})", quote_ident(table)))?;
        let idx = rs.columns.iter().position(|c| c == "name").unwrap_or(1);
        let cols: Vec<String> = rs.rows.into_iter().map(|r| r[idx].to_string()).collect();
        Ok((!cols.is_empty()).then_some(cols))
    }

    fn table_names(&self) -> Result<Vec<String>> {
        let rs = self.query(
            "SELECT name FROM sqlite_temp_master WHERE type = 'table' \
             UNION SELECT name FROM sqlite_master WHERE type IN ('table', 'view') ORDER BY 1",
        )?;
        Ok(rs.rows.into_iter().map(|r| r[0].to_string()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn temp_tables_round_trip() {
        let db = SqliteDatabase::from_script("CREATE TABLE t(a TEXT, b INTEGER); INSERT INTO t VALUES ('x', 1), ('x', 2), (NULL, 3);").unwrap();
        assert_eq!(db.distinct_values("t", "a").unwrap(), vec![SqlValue::from("x")]);
        db.create_temp_table("tmp", &["__value", "__output"], &[vec!["x".into(), 1.into()]])
            .unwrap();
        assert_eq!(db.table_columns("tmp").unwrap().unwrap(), vec!["__value", "__output"]);
        assert!(db.table_names().unwrap().contains(&"tmp".to_string()));
        db.drop_table("tmp").unwrap();
        assert_eq!(db.table_columns("tmp").unwrap(), None);
    }

    #[test]
    fn engine_errors_are_classified() {
        let db = SqliteDatabase::from_script("CREATE TABLE t(a);").unwrap();
        assert!(matches!(db.query("SELECT b FROM t"), Err(Error::ColumnReference(_))));
        assert!(matches!(db.query("SELECT a FROM nope"), Err(Error::HallucinatedTable(_))));
        assert!(matches!(db.query("SELEC a"), Err(Error::NativeSyntax(_))));
    }
}
