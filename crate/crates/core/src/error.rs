use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Byte range into the query text, with the 1-based line/column of its start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

impl Span {
    pub fn locate(text: &str, start: usize, end: usize) -> Span {
        let before = &text[..start.min(text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Span {
            start,
            end,
            line,
            column,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub message: String,
    pub span: Span,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (line {}, column {})",
            self.message, self.span.line, self.span.column
        )
    }
}

/// Execution error taxonomy. Every [`Error`] maps onto exactly one category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCategory {
    EmptyLLMQAContext,
    GenericSyntax,
    ColumnReferenceError,
    HallucinatedColumn,
    TokenizationError,
    HallucinatedTable,
    FStringSyntax,
    Misc,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 8] = [
        ErrorCategory::EmptyLLMQAContext,
        ErrorCategory::GenericSyntax,
        ErrorCategory::ColumnReferenceError,
        ErrorCategory::HallucinatedColumn,
        ErrorCategory::TokenizationError,
        ErrorCategory::HallucinatedTable,
        ErrorCategory::FStringSyntax,
        ErrorCategory::Misc,
    ];

    /// Process exit code used by the command-line tool for this category.
    pub fn exit_code(self) -> i32 {
        10 + Self::ALL.iter().position(|c| *c == self).unwrap_or(7) as i32
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorCategory::EmptyLLMQAContext => "EmptyLLMQAContext",
            ErrorCategory::GenericSyntax => "GenericSyntax",
            ErrorCategory::ColumnReferenceError => "ColumnReferenceError",
            ErrorCategory::HallucinatedColumn => "HallucinatedColumn",
            ErrorCategory::TokenizationError => "TokenizationError",
            ErrorCategory::HallucinatedTable => "HallucinatedTable",
            ErrorCategory::FStringSyntax => "FStringSyntax",
            ErrorCategory::Misc => "Misc",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error: {0}")]
    Syntax(SyntaxError),
    #[error("f-string syntax error: {0}")]
    FStringSyntax(SyntaxError),
    /// Syntax error reported by the database engine itself.
    #[error("native syntax error: {0}")]
    NativeSyntax(String),
    #[error("empty context: {0}")]
    EmptyContext(String),
    #[error("template expects {expected} placeholder values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("hallucinated column `{0}`")]
    HallucinatedColumn(String),
    #[error("hallucinated table `{0}`")]
    HallucinatedTable(String),
    #[error("column reference error: {0}")]
    ColumnReference(String),
    #[error("tokenization error: {0}")]
    Tokenization(String),
    #[error("constraint pattern `{0}` accepts no string")]
    EmptyLanguage(String),
    #[error("literal context over `{0}` has no distinct values")]
    EmptyLiteralSet(String),
    #[error("literal context over `{column}` exceeds the cap of {cap} distinct values")]
    LiteralSetTooLarge { column: String, cap: usize },
    #[error("cannot coerce {raw:?} to {ty}")]
    Coercion { raw: String, ty: String },
    #[error("type affinity cannot coerce {value:?} in a {ty} context")]
    TypeAffinity { value: String, ty: String },
    #[error("invalid function usage: {0}")]
    InvalidFunction(String),
    #[error("invalid constraint pattern: {0}")]
    Pattern(String),
    #[error("database error: {0}")]
    Database(String),
    #[error("document store error: {0}")]
    Store(String),
    #[error("model spec error: {0}")]
    ModelSpec(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Syntax(_) | Error::NativeSyntax(_) => ErrorCategory::GenericSyntax,
            Error::FStringSyntax(_) | Error::Arity { .. } => ErrorCategory::FStringSyntax,
            Error::EmptyContext(_) => ErrorCategory::EmptyLLMQAContext,
            Error::HallucinatedColumn(_) => ErrorCategory::HallucinatedColumn,
            Error::HallucinatedTable(_) => ErrorCategory::HallucinatedTable,
            Error::ColumnReference(_) => ErrorCategory::ColumnReferenceError,
            Error::Tokenization(_) => ErrorCategory::TokenizationError,
            _ => ErrorCategory::Misc,
        }
    }

    /// Classify an engine error message into the taxonomy.
    pub fn from_engine_message(message: impl Into<String>) -> Error {
        let message = message.into();
        if message.contains("no such column") || message.contains("ambiguous column") {
            Error::ColumnReference(message)
        } else if message.contains("no such table") {
            Error::HallucinatedTable(message)
        } else if message.contains("syntax error") || message.contains("incomplete input") {
            Error::NativeSyntax(message)
        } else {
            Error::Database(message)
        }
    }
}

impl From<rusqlite::Error> for Error {
    fn from(e: rusqlite::Error) -> Self {
        Error::from_engine_message(e.to_string())
    }
}
