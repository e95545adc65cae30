use super::pattern::LIST_SEPARATOR;
use super::InferredType;
use crate::error::{Error, Result};
use crate::value::SqlValue;

#[derive(Debug, Clone, PartialEq)]
pub enum Coerced {
    Scalar(SqlValue),
    List(Vec<SqlValue>),
}

/// Converts raw model output into SQL values for type `t`. Text is trimmed
/// and lowercased; `true`/`false` become 1/0 wherever a boolean or free
/// text is expected.
pub fn coerce_output(raw: &str, t: &InferredType) -> Result<Coerced> {
    let text = raw.trim().to_lowercase();
    match t {
        InferredType::ListOf { inner, .. } => coerce_list(&text, inner).map(Coerced::List),
        _ => coerce_scalar(&text, t).map(Coerced::Scalar),
    }
}

fn coercion_error(raw: &str, t: &InferredType) -> Error {
    Error::Coercion {
        raw: raw.to_string(),
        ty: t.to_string(),
    }
}

fn parse_bool(text: &str) -> Option<i64> {
    match text {
        "true" => Some(1),
        "false" => Some(0),
        _ => None,
    }
}

fn parse_number(text: &str) -> Option<SqlValue> {
    if let Ok(i) = text.parse::<i64>() {
        return Some(SqlValue::Integer(i));
    }
    let looks_numeric = !text.is_empty()
        && text
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e'));
    if looks_numeric {
        text.parse::<f64>()
            .ok()
            .filter(|f| f.is_finite())
            .map(SqlValue::Real)
    } else {
        None
    }
}

fn coerce_scalar(text: &str, t: &InferredType) -> Result<SqlValue> {
    match t {
        InferredType::Bool => parse_bool(text)
            .map(SqlValue::Integer)
            .ok_or_else(|| coercion_error(text, t)),
        InferredType::Int => match parse_number(text) {
            Some(SqlValue::Integer(i)) => Ok(SqlValue::Integer(i)),
            // Digit strings too long for i64 saturate, so integer-only
            // positions such as LIMIT still accept them.
            Some(SqlValue::Real(r)) if !text.contains(['.', 'e']) => {
                Ok(SqlValue::Integer(if r < 0.0 { i64::MIN } else { i64::MAX }))
            }
            _ => Err(coercion_error(text, t)),
        },
        InferredType::Float | InferredType::NumericUnion => {
            parse_number(text).ok_or_else(|| coercion_error(text, t))
        }
        InferredType::Literal(values) => {
            values
                .iter()
                .find(|v| v.as_str() == text || v.trim() == text)
                .map(|v| SqlValue::Text(v.clone()))
                .ok_or_else(|| coercion_error(text, t))
        }
        InferredType::Any => Ok(match parse_bool(text) {
            Some(b) => SqlValue::Integer(b),
            None => SqlValue::Text(text.to_string()),
        }),
        InferredType::ListOf { .. } => Err(coercion_error(text, t)),
    }
}

fn coerce_list(text: &str, inner: &InferredType) -> Result<Vec<SqlValue>> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    if matches!(inner, InferredType::Any) {
        return text
            .split(LIST_SEPARATOR)
            .map(|item| coerce_scalar(item, inner))
            .collect();
    }
    // Items may themselves contain the separator (literal values with
    // commas), so segment by dynamic programming over separator positions.
    let cuts: Vec<usize> = std::iter::once(0)
        .chain(
            text.match_indices(LIST_SEPARATOR)
                .map(|(i, _)| i + LIST_SEPARATOR.len()),
        )
        .collect();
    let n = cuts.len();
    // next[i]: index of the cut ending the first item of a valid segmentation
    // of the suffix starting at cut i (n means end of text).
    let mut next: Vec<Option<usize>> = vec![None; n];
    for i in (0..n).rev() {
        for j in i + 1..=n {
            let end = if j == n {
                text.len()
            } else {
                cuts[j] - LIST_SEPARATOR.len()
            };
            let reachable = j == n || next[j].is_some();
            if reachable && coerce_scalar(&text[cuts[i]..end], inner).is_ok() {
                next[i] = Some(j);
                break;
            }
        }
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let j = next[i].ok_or_else(|| coercion_error(text, &InferredType::list_of(inner.clone(), None)))?;
        let end = if j == n {
            text.len()
        } else {
            cuts[j] - LIST_SEPARATOR.len()
        };
        out.push(coerce_scalar(&text[cuts[i]..end], inner)?);
        i = j;
    }
    Ok(out)
}

/// Checks that a value inserted as text can stand in a context of type `t`
/// through the engine's implicit numeric conversion. Verbose answers such as
/// `the answer is 40.` cannot, and are rejected instead of silently
/// comparing as text.
pub fn check_affinity(value: &SqlValue, t: &InferredType) -> Result<()> {
    let SqlValue::Text(text) = value else {
        return Ok(());
    };
    let ok = match t {
        InferredType::Int | InferredType::Float | InferredType::NumericUnion => {
            parse_number(text.trim()).is_some()
        }
        InferredType::Bool => matches!(text.trim(), "0" | "1"),
        InferredType::ListOf { inner, .. } => return check_affinity(value, inner),
        InferredType::Literal(_) | InferredType::Any => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::TypeAffinity {
            value: text.clone(),
            ty: t.to_string(),
        })
    }
}
