//! Return types of function nodes, inferred from expression context.

pub mod coerce;
pub mod infer;
pub mod pattern;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sql::Quantifier;

pub use coerce::{check_affinity, coerce_output, Coerced};
pub use infer::{infer_return_type, locate_context, ContextRule, Inference};
pub use pattern::{type_to_pattern, ConstraintPattern, PatternKind};

#[derive(Debug, Clone, PartialEq)]
pub enum InferredType {
    Bool,
    Int,
    Float,
    NumericUnion,
    /// Distinct, lowercased, non-null database values in first-seen order.
    Literal(Vec<String>),
    ListOf {
        inner: Box<InferredType>,
        quantifier: Option<Quantifier>,
    },
    Any,
}

impl InferredType {
    pub fn list_of(inner: InferredType, quantifier: Option<Quantifier>) -> Self {
        InferredType::ListOf {
            inner: Box::new(inner),
            quantifier,
        }
    }

    pub fn is_list(&self) -> bool {
        matches!(self, InferredType::ListOf { .. })
    }

    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            InferredType::Int | InferredType::Float | InferredType::NumericUnion
        )
    }

    /// Prompt hint, e.g. `int` or `Literal['a', 'b']`.
    pub fn hint(&self) -> String {
        match self {
            InferredType::Any => "str".into(),
            InferredType::ListOf { inner, .. } => format!("List[{}]", inner.hint()),
            other => other.to_string(),
        }
    }

    /// Shape kept under the policies that insert text: lists stay lists,
    /// everything else becomes free text.
    pub fn erased(&self) -> InferredType {
        match self {
            InferredType::ListOf { quantifier, .. } => {
                InferredType::list_of(InferredType::Any, *quantifier)
            }
            _ => InferredType::Any,
        }
    }
}

/// Signature notation: `bool`, `int`, `float`, `Union[float, int]`,
/// `Literal['a', 'b']`, `List[...]`, `Any`.
impl fmt::Display for InferredType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InferredType::Bool => f.write_str("bool"),
            InferredType::Int => f.write_str("int"),
            InferredType::Float => f.write_str("float"),
            InferredType::NumericUnion => f.write_str("Union[float, int]"),
            InferredType::Literal(values) => {
                f.write_str("Literal[")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "'{}'", v.replace('\\', "\\\\").replace('\'', "\\'"))?;
                }
                f.write_str("]")
            }
            InferredType::ListOf { inner, .. } => write!(f, "List[{inner}]"),
            InferredType::Any => f.write_str("Any"),
        }
    }
}

/// How function output is produced and spliced back into the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypingPolicy {
    /// Plain prompt; output inserted as text.
    None,
    /// Type hint in the prompt; output inserted as text.
    Hints,
    /// Type hint plus decoding constrained to the type's pattern; output
    /// inserted as a typed literal.
    Constrained,
}

impl TypingPolicy {
    pub const ALL: [TypingPolicy; 3] = [
        TypingPolicy::None,
        TypingPolicy::Hints,
        TypingPolicy::Constrained,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TypingPolicy::None => "none",
            TypingPolicy::Hints => "hints",
            TypingPolicy::Constrained => "constrained",
        }
    }
}

impl fmt::Display for TypingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TypingPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(TypingPolicy::None),
            "hints" => Ok(TypingPolicy::Hints),
            "constrained" => Ok(TypingPolicy::Constrained),
            _ => Err(format!(
                "unknown policy `{s}`; expected none, hints or constrained"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TypeConfig {
    /// Largest distinct-value set a Literal context may draw.
    pub literal_cap: usize,
    /// Widen integer and float patterns with an optional leading `-`.
    pub allow_negative: bool,
}

impl Default for TypeConfig {
    fn default() -> Self {
        TypeConfig {
            literal_cap: 500,
            allow_negative: false,
        }
    }
}
