use std::time::Duration;

use serde::Serialize;

use crate::error::{Error, ErrorCategory};
use crate::types::TypingPolicy;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportedError {
    pub category: ErrorCategory,
    pub message: String,
}

impl ReportedError {
    pub fn from_error(e: &Error) -> Self {
        ReportedError {
            category: e.category(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FunctionReport {
    pub node: usize,
    pub kind: String,
    pub question: String,
    pub context: String,
    pub inferred_type: String,
    pub generations: u64,
    pub forward_passes: u64,
    /// Distinct input values for map functions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distinct_inputs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temp_table: Option<String>,
    /// Raw model outputs, in input order.
    pub outputs: Vec<String>,
}

/// Per-query accounting. Serializes deterministically; wall time is only
/// included on request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionReport {
    pub schema_version: u32,
    pub policy: TypingPolicy,
    pub lm_generations: u64,
    pub forward_passes: u64,
    pub prefix_forward_passes: u64,
    pub prefix_cache_hits: u64,
    pub native_statements: u64,
    pub functions: Vec<FunctionReport>,
    pub errors: Vec<ReportedError>,
    pub notes: Vec<String>,
    pub final_sql: Option<String>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl ExecutionReport {
    pub fn new(policy: TypingPolicy) -> Self {
        ExecutionReport {
            schema_version: REPORT_SCHEMA_VERSION,
            policy,
            lm_generations: 0,
            forward_passes: 0,
            prefix_forward_passes: 0,
            prefix_cache_hits: 0,
            native_statements: 0,
            functions: Vec::new(),
            errors: Vec::new(),
            notes: Vec::new(),
            final_sql: None,
            wall_time: Duration::ZERO,
        }
    }

    pub fn first_error_category(&self) -> Option<ErrorCategory> {
        self.errors.first().map(|e| e.category)
    }

    pub fn to_json_value(&self, timings: bool) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if timings {
            v["wall_time_ms"] = serde_json::json!(self.wall_time.as_secs_f64() * 1000.0);
        }
        v
    }

    pub fn to_json(&self, timings: bool) -> String {
        serde_json::to_string_pretty(&self.to_json_value(timings)).expect("report serializes")
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "generations={} forward_passes={} prefix_forward_passes={} cache_hits={} native_statements={}",
            self.lm_generations,
            self.forward_passes,
            self.prefix_forward_passes,
            self.prefix_cache_hits,
            self.native_statements
        );
        for e in &self.errors {
            s.push_str(&format!("\nerror[{}]: {}", e.category, e.message));
        }
        s
    }
}
