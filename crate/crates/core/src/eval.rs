//! Suite runner and answer matching for benchmark runs.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{execute, Database, ExecOptions, ReportedError, REPORT_SCHEMA_VERSION};
use crate::model::ModelBackend;
use crate::types::TypingPolicy;
use crate::value::SqlValue;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteItem {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub question: String,
    pub query: String,
    /// Scalar, list of values, or null for "no rows".
    #[serde(default)]
    pub expected: serde_json::Value,
}

/// Reads a JSON-lines suite. Blank lines are skipped.
pub fn parse_suite(text: &str) -> Result<Vec<SuiteItem>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Internal(format!("suite line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn load_suite(path: &Path) -> Result<Vec<SuiteItem>> {
    parse_suite(&std::fs::read_to_string(path)?)
}

fn canonical_number(s: &str) -> Option<String> {
    let x: f64 = s.trim().parse().ok()?;
    if !x.is_finite() {
        return None;
    }
    if x.fract() == 0.0 && x.abs() < 1e15 {
        Some(format!("{}", x as i64))
    } else {
        Some(format!("{x}"))
    }
}

/// Numeric strings compare by value, everything else by lowercase text.
pub fn normalize_answer(s: &str) -> String {
    canonical_number(s).unwrap_or_else(|| s.trim().to_lowercase())
}

fn json_cells(v: &serde_json::Value) -> Vec<String> {
    match v {
        serde_json::Value::Null => Vec::new(),
        serde_json::Value::Array(items) => items.iter().flat_map(json_cells).collect(),
        serde_json::Value::Bool(b) => vec![(*b as i64).to_string()],
        serde_json::Value::String(s) => vec![s.clone()],
        other => vec![other.to_string()],
    }
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

/// Multiset equality of normalized cells.
pub fn denotation_match(predicted: &[SqlValue], expected: &serde_json::Value) -> bool {
    let p = predicted.iter().map(|v| normalize_answer(&v.to_string())).collect();
    let e = json_cells(expected).iter().map(|s| normalize_answer(s)).collect();
    sorted(p) == sorted(e)
}

/// Cell-for-cell string equality, in order.
pub fn exact_match(predicted: &[SqlValue], expected: &serde_json::Value) -> bool {
    let p: Vec<String> = predicted.iter().map(SqlValue::to_string).collect();
    p == json_cells(expected)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemResult {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub question: String,
    pub expected: serde_json::Value,
    pub predicted: Option<Vec<String>>,
    pub exact_match: bool,
    pub denotation_match: bool,
    pub lm_generations: u64,
    pub forward_passes: u64,
    pub prefix_forward_passes: u64,
    pub prefix_cache_hits: u64,
    pub native_statements: u64,
    pub errors: Vec<ReportedError>,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Aggregate {
    pub items: usize,
    pub exact_matches: usize,
    pub denotation_matches: usize,
    pub denotation_accuracy: f64,
    pub lm_generations: u64,
    pub forward_passes: u64,
    pub prefix_forward_passes: u64,
    pub prefix_cache_hits: u64,
    pub failed: usize,
    pub errors_by_category: BTreeMap<String, usize>,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub policy: TypingPolicy,
    pub items: Vec<ItemResult>,
    pub aggregate: Aggregate,
}

impl SuiteReport {
    pub fn to_json_value(&self, timings: bool) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if timings {
            let ms = |d: Duration| serde_json::json!(d.as_secs_f64() * 1000.0);
            for (item, out) in self.items.iter().zip(v["items"].as_array_mut().into_iter().flatten()) {
                out["wall_time_ms"] = ms(item.wall_time);
            }
            v["aggregate"]["wall_time_ms"] = ms(self.aggregate.wall_time);
        }
        v
    }

    pub fn to_json(&self, timings: bool) -> String {
        serde_json::to_string_pretty(&self.to_json_value(timings)).expect("report serializes")
    }
}

/// Runs every item in its own session. Item failures are recorded, never
/// fatal to the run.
pub fn run_suite<B: ModelBackend + ?Sized>(
    items: &[SuiteItem],
    db: &dyn Database,
    backend: &B,
    opts: &ExecOptions,
) -> SuiteReport {
    let mut agg = Aggregate::default();
    let mut results = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        let ex = execute(&item.query, db, backend, opts);
        let r = &ex.report;
        let cells: Option<Vec<SqlValue>> = ex.result.as_ref().ok().map(|rs| rs.rows.iter().flatten().cloned().collect());
        let (exact, denot) = match &cells {
            Some(c) => (exact_match(c, &item.expected), denotation_match(c, &item.expected)),
            None => (false, false),
        };
        agg.items += 1;
        agg.exact_matches += exact as usize;
        agg.denotation_matches += denot as usize;
        agg.lm_generations += r.lm_generations;
        agg.forward_passes += r.forward_passes;
        agg.prefix_forward_passes += r.prefix_forward_passes;
        agg.prefix_cache_hits += r.prefix_cache_hits;
        agg.wall_time += r.wall_time;
        if ex.result.is_err() {
            agg.failed += 1;
        }
        for e in &r.errors {
            *agg.errors_by_category.entry(e.category.to_string()).or_default() += 1;
        }
        results.push(ItemResult {
            index,
            id: item.id.clone(),
            question: item.question.clone(),
            expected: item.expected.clone(),
            predicted: cells.map(|c| c.iter().map(SqlValue::to_string).collect()),
            exact_match: exact,
            denotation_match: denot,
            lm_generations: r.lm_generations,
            forward_passes: r.forward_passes,
            prefix_forward_passes: r.prefix_forward_passes,
            prefix_cache_hits: r.prefix_cache_hits,
            native_statements: r.native_statements,
            errors: r.errors.clone(),
            wall_time: r.wall_time,
        });
    }
    if agg.items > 0 {
        agg.denotation_accuracy = agg.denotation_matches as f64 / agg.items as f64;
    }
    SuiteReport {
        schema_version: REPORT_SCHEMA_VERSION,
        policy: opts.functions.policy,
        items: results,
        aggregate: agg,
    }
}
