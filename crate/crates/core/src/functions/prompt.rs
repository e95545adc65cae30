//! Prompt templates and their rendering.
//!
//! Templates use `{{slot}}` substitution plus three line directives:
//! `{% if slot %}` / `{% endif %}` keep the enclosed lines only when the slot
//! has a value, and `{% cache %}` marks the end of the cacheable prefix.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::value::SqlValue;

pub const QA_TEMPLATE: &str = include_str!("../../templates/llmqa.txt");
pub const MAP_TEMPLATE: &str = include_str!("../../templates/llmmap.txt");

/// A rendered prompt, split where the template marks the end of the shared
/// prefix. `prefix` is empty for templates without a cache marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub prefix: String,
    pub suffix: String,
}

impl Prompt {
    pub fn text(&self) -> String {
        format!("{}{}", self.prefix, self.suffix)
    }
}

fn substitute(line: &str, slots: &HashMap<&str, &str>) -> String {
    let mut out = String::new();
    let mut rest = line;
    while let Some(open) = rest.find("{{") {
        let Some(close) = rest[open + 2..].find("}}") else {
            break;
        };
        let name = rest[open + 2..open + 2 + close].trim();
        match slots.get(name) {
            Some(v) => {
                out.push_str(&rest[..open]);
                out.push_str(v);
            }
            None => out.push_str(&rest[..open + 4 + close]),
        }
        rest = &rest[open + 4 + close..];
    }
    out.push_str(rest);
    out
}

pub fn render_template(template: &str, slots: &[(&str, Option<&str>)]) -> Prompt {
    let values: HashMap<&str, &str> = slots
        .iter()
        .filter_map(|&(k, v)| v.map(|v| (k, v)))
        .collect();
    let body = template.strip_suffix('\n').unwrap_or(template);
    let mut lines: Vec<String> = Vec::new();
    let mut split_at: Option<usize> = None;
    let mut active: Vec<bool> = Vec::new();
    for line in body.split('\n') {
        let directive = line
            .trim()
            .strip_prefix("{%")
            .and_then(|l| l.strip_suffix("%}"))
            .map(str::trim);
        let on = active.iter().all(|&a| a);
        match directive {
            Some(d) if d.starts_with("if ") => active.push(values.contains_key(d[3..].trim())),
            Some("endif") => {
                active.pop();
            }
            Some("cache") if on => split_at = Some(lines.len()),
            Some("cache") => {}
            _ if on => lines.push(substitute(line, &values)),
            _ => {}
        }
    }
    match split_at {
        // The newline ending the last prefix line belongs to the prefix.
        Some(i) if i > 0 => Prompt {
            prefix: lines[..i].join("\n") + "\n",
            suffix: lines[i..].join("\n"),
        },
        _ => Prompt {
            prefix: String::new(),
            suffix: lines.join("\n"),
        },
    }
}

/// Substitutes each `{}` in `template` with the value of the matching
/// argument. An argument is the evaluated result of a subquery or literal;
/// it contributes its first value, and an argument with no value at all is
/// an empty context.
pub fn fill_placeholders(template: &str, args: &[Vec<SqlValue>]) -> Result<String> {
    let expected = template.matches("{}").count();
    if expected != args.len() {
        return Err(Error::Arity {
            expected,
            got: args.len(),
        });
    }
    let mut out = String::new();
    let mut pieces = template.split("{}");
    out.push_str(pieces.next().unwrap_or(""));
    for (piece, arg) in pieces.zip(args) {
        let value = arg.first().ok_or_else(|| {
            Error::EmptyContext(format!("placeholder argument for `{template}` returned no rows"))
        })?;
        out.push_str(&value.to_string());
        out.push_str(piece);
    }
    Ok(out)
}

/// Renders rows as a `; `-separated list (columns within a row joined by
/// ` | `), keeping whole items while the total stays within `budget`
/// characters.
pub fn render_context(rows: &[Vec<SqlValue>], budget: usize) -> String {
    let mut out = String::new();
    let mut used = 0;
    for row in rows {
        let item = row.iter().map(SqlValue::to_string).collect::<Vec<_>>().join(" | ");
        let extra = item.chars().count() + if out.is_empty() { 0 } else { 2 };
        if used + extra > budget {
            break;
        }
        if !out.is_empty() {
            out.push_str("; ");
        }
        out.push_str(&item);
        used += extra;
    }
    out
}

pub fn qa_prompt(question: &str, return_type: Option<&str>, context: Option<&str>) -> Prompt {
    render_template(
        QA_TEMPLATE,
        &[
            ("question", Some(question)),
            ("return_type", return_type),
            ("context", context),
        ],
    )
}

/// Python-style literal for a value inside `f(...)`.
pub fn map_value_literal(v: &SqlValue) -> String {
    match v {
        SqlValue::Text(s) => serde_json::to_string(s).unwrap_or_else(|_| format!("{s:?}")),
        SqlValue::Null => "None".into(),
        other => other.to_string(),
    }
}

pub fn map_prompt(
    question: &str,
    return_type: &str,
    table: &str,
    column: &str,
    value: &SqlValue,
    context: Option<&str>,
) -> Prompt {
    let value = map_value_literal(value);
    render_template(
        MAP_TEMPLATE,
        &[
            ("question", Some(question)),
            ("return_type", Some(return_type)),
            ("table_name", Some(table)),
            ("column_name", Some(column)),
            ("value", Some(&value)),
            ("context", context),
        ],
    )
}
