use std::io::Write;

use blendkit::{ResultSet, SqlValue};
use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

fn cell(v: &SqlValue) -> String {
    match v {
        SqlValue::Null => "NULL".into(),
        other => other.to_string(),
    }
}

pub fn write_rows(rs: &ResultSet, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
    match format {
        Format::Table => write_table(rs, out),
        Format::Json => {
            let v = serde_json::json!({ "columns": rs.columns, "rows": rs.rows });
            writeln!(out, "{}", serde_json::to_string(&v).expect("rows serialize"))
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&rs.columns)?;
            for row in &rs.rows {
                // NULL is an empty field in CSV.
                w.write_record(row.iter().map(|v| if v.is_null() { String::new() } else { v.to_string() }))?;
            }
            w.flush()
        }
    }
}

fn write_table(rs: &ResultSet, out: &mut dyn Write) -> std::io::Result<()> {
    let cells: Vec<Vec<String>> = rs.rows.iter().map(|r| r.iter().map(cell).collect()).collect();
    let mut widths: Vec<usize> = rs.columns.iter().map(|c| c.chars().count()).collect();
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |out: &mut dyn Write, row: &[String]| -> std::io::Result<()> {
        let padded: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        writeln!(out, "{}", padded.join(" | ").trim_end())
    };
    line(out, &rs.columns)?;
    writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"))?;
    for row in &cells {
        line(out, row)?;
    }
    writeln!(out, "({} row{})", cells.len(), if cells.len() == 1 { "" } else { "s" })
}
