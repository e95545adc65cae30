use super::{InferredType, TypeConfig};
use crate::error::{Error, Result};

pub const LIST_SEPARATOR: &str = ", ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternKind {
    Regex,
    LiteralAlternation,
    ListOf {
        min: usize,
        max: Option<usize>,
        separator: String,
    },
}

/// A regular language over output bytes, anchored at both ends when used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintPattern {
    pub kind: PatternKind,
    pub pattern: String,
}

impl ConstraintPattern {
    fn regex(pattern: impl Into<String>) -> Self {
        ConstraintPattern {
            kind: PatternKind::Regex,
            pattern: pattern.into(),
        }
    }
}

pub fn type_to_pattern(t: &InferredType, cfg: &TypeConfig) -> Result<ConstraintPattern> {
    let sign = if cfg.allow_negative { "-?" } else { "" };
    Ok(match t {
        InferredType::Bool => ConstraintPattern::regex("(True|False)"),
        InferredType::Int => ConstraintPattern::regex(format!(r"{sign}\d+")),
        InferredType::Float | InferredType::NumericUnion => {
            ConstraintPattern::regex(format!(r"{sign}\d+(\.\d+)?"))
        }
        InferredType::Literal(values) => {
            if values.is_empty() {
                return Err(Error::EmptyLiteralSet("literal context".into()));
            }
            let escaped: Vec<String> = values.iter().map(|v| regex_syntax::escape(v)).collect();
            let pattern = if escaped.len() == 1 {
                escaped.into_iter().next().expect("one value")
            } else {
                format!("({})", escaped.join("|"))
            };
            ConstraintPattern {
                kind: PatternKind::LiteralAlternation,
                pattern,
            }
        }
        InferredType::ListOf { inner, quantifier } => {
            let item = type_to_pattern(inner, cfg)?;
            let (min, max) = quantifier.map_or((1, None), |q| (q.min, q.max));
            let item = format!("(?:{})", item.pattern);
            let sep = regex_syntax::escape(LIST_SEPARATOR);
            let rest = |lo: usize, hi: Option<usize>| match hi {
                Some(hi) if hi == lo => format!("(?:{sep}{item}){{{lo}}}"),
                Some(hi) => format!("(?:{sep}{item}){{{lo},{hi}}}"),
                None => format!("(?:{sep}{item}){{{lo},}}"),
            };
            let pattern = if min == 0 {
                let hi = max.map(|m| m.saturating_sub(1));
                format!("(?:{item}{})?", rest(0, hi))
            } else {
                format!("{item}{}", rest(min - 1, max.map(|m| m - 1)))
            };
            ConstraintPattern {
                kind: PatternKind::ListOf {
                    min,
                    max,
                    separator: LIST_SEPARATOR.into(),
                },
                pattern,
            }
        }
        InferredType::Any => ConstraintPattern::regex(r"[^\n]*"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::Quantifier;

    fn pat(t: &InferredType) -> String {
        type_to_pattern(t, &TypeConfig::default()).unwrap().pattern
    }

    #[test]
    fn primitive_patterns() {
        assert_eq!(pat(&InferredType::Int), r"\d+");
        assert_eq!(pat(&InferredType::Bool), "(True|False)");
        assert_eq!(pat(&InferredType::Float), r"\d+(\.\d+)?");
        let cfg = TypeConfig {
            allow_negative: true,
            ..TypeConfig::default()
        };
        assert_eq!(type_to_pattern(&InferredType::Int, &cfg).unwrap().pattern, r"-?\d+");
    }

    #[test]
    fn literal_patterns_escape_values() {
        assert_eq!(pat(&InferredType::Literal(vec!["a".into()])), "a");
        assert_eq!(
            pat(&InferredType::Literal(vec!["d.c.".into(), "(x)".into()])),
            r"(d\.c\.|\(x\))"
        );
        assert!(matches!(
            type_to_pattern(&InferredType::Literal(vec![]), &TypeConfig::default()),
            Err(Error::EmptyLiteralSet(_))
        ));
    }

    #[test]
    fn list_pattern_uses_quantifier() {
        let t = InferredType::list_of(
            InferredType::Literal(vec!["red sox".into(), "mets".into()]),
            Some(Quantifier::exactly(2)),
        );
        assert_eq!(pat(&t), "(?:(red sox|mets))(?:, (?:(red sox|mets))){1}");
    }
}
