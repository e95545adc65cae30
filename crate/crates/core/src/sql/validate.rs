//! Static, syntax-shape checks on query text. Semantic facts (which tables
//! and columns exist) are out of reach here by design.

use serde::{Deserialize, Serialize};

use super::ast::FunctionKind;
use super::lexer::{tokenize, Token, TokenKind};
use crate::error::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    UnbalancedParentheses,
    UnbalancedQuotes,
    UnbalancedBraces,
    UnknownFunction,
    MissingQuestion,
    MissingColumnArg,
    ScalarQuantifier,
    InvalidToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl Violation {
    fn at(text: &str, offset: usize, kind: ViolationKind, message: impl Into<String>) -> Self {
        let span = Span::locate(text, offset, offset);
        Violation {
            kind,
            line: span.line,
            column: span.column,
            message: message.into(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("violation serializes")
    }
}

pub fn validate_grammar(text: &str) -> Vec<Violation> {
    let tokens = match tokenize(text) {
        Ok(t) => t,
        Err(e) => {
            let kind = if e.message.starts_with("unterminated") {
                ViolationKind::UnbalancedQuotes
            } else {
                ViolationKind::InvalidToken
            };
            return vec![Violation {
                kind,
                line: e.span.line,
                column: e.span.column,
                message: e.message,
            }];
        }
    };
    let mut out = Vec::new();
    check_balance(text, &tokens, &mut out);
    for (i, tok) in tokens.iter().enumerate() {
        if tok.kind == TokenKind::OpenFn {
            check_function(text, &tokens, i, &mut out);
        }
    }
    out.sort_by_key(|v| (v.line, v.column));
    out
}

fn check_balance(text: &str, tokens: &[Token], out: &mut Vec<Violation>) {
    let mut parens: Vec<usize> = Vec::new();
    let mut braces: Vec<usize> = Vec::new();
    for tok in tokens {
        match tok.kind {
            TokenKind::LParen => parens.push(tok.start),
            TokenKind::RParen => {
                if parens.pop().is_none() {
                    out.push(Violation::at(
                        text,
                        tok.start,
                        ViolationKind::UnbalancedParentheses,
                        "unmatched `)`",
                    ));
                }
            }
            TokenKind::OpenFn => braces.push(tok.start),
            TokenKind::CloseFn => {
                if braces.pop().is_none() {
                    out.push(Violation::at(
                        text,
                        tok.start,
                        ViolationKind::UnbalancedBraces,
                        "unmatched `}}`",
                    ));
                }
            }
            _ => {}
        }
    }
    if let Some(&first) = parens.first() {
        out.push(Violation::at(
            text,
            first,
            ViolationKind::UnbalancedParentheses,
            format!("{} unclosed `(`", parens.len()),
        ));
    }
    if let Some(&first) = braces.first() {
        out.push(Violation::at(
            text,
            first,
            ViolationKind::UnbalancedBraces,
            format!("{} unclosed `{{{{`", braces.len()),
        ));
    }
}

fn check_function(text: &str, tokens: &[Token], open: usize, out: &mut Vec<Violation>) {
    let at = tokens[open].start;
    let kind = match tokens.get(open + 1).map(|t| &t.kind) {
        Some(TokenKind::Word(w)) => FunctionKind::from_name(w),
        _ => None,
    };
    let Some(kind) = kind else {
        out.push(Violation::at(
            text,
            at,
            ViolationKind::UnknownFunction,
            "expected LLMQA, LLMMap or LLMSearchMap after `{{`",
        ));
        return;
    };
    if tokens.get(open + 2).map(|t| &t.kind) != Some(&TokenKind::LParen) {
        out.push(Violation::at(
            text,
            at,
            ViolationKind::MissingQuestion,
            format!("{kind} must be called with arguments"),
        ));
        return;
    }
    let args = split_args(tokens, open + 3);
    let question_ok = args
        .first()
        .is_some_and(|a| a.len() == 1 && matches!(a[0].kind, TokenKind::String(_)));
    if !question_ok {
        out.push(Violation::at(
            text,
            at,
            ViolationKind::MissingQuestion,
            format!("{kind} must receive a quoted question string first"),
        ));
    }
    let is_kwarg = |a: &&[Token]| {
        a.len() >= 2 && matches!(a[0].kind, TokenKind::Word(_)) && a[1].kind == TokenKind::Eq
    };
    if kind.is_map() {
        let has_column = args.iter().skip(1).filter(|a| !is_kwarg(a)).any(|a| {
            a.len() == 3
                && matches!(a[0].kind, TokenKind::Word(_) | TokenKind::QuotedIdent(_))
                && a[1].kind == TokenKind::Dot
                && matches!(a[2].kind, TokenKind::Word(_) | TokenKind::QuotedIdent(_))
        });
        if !has_column {
            out.push(Violation::at(
                text,
                at,
                ViolationKind::MissingColumnArg,
                format!("{kind} must receive a `table.column` reference"),
            ));
        }
    }
    let has_quantifier = args
        .iter()
        .filter(|a| is_kwarg(a))
        .any(|a| a[0].is_keyword("quantifier"));
    if has_quantifier {
        let list_context = open
            .checked_sub(1)
            .and_then(|i| tokens.get(i))
            .is_some_and(|t| t.is_keyword("IN") || t.is_keyword("VALUES"));
        if !list_context {
            out.push(Violation::at(
                text,
                at,
                ViolationKind::ScalarQuantifier,
                "quantifier is only meaningful in IN or VALUES position",
            ));
        }
    }
}

/// Splits the argument tokens of a call starting just after its `(` into
/// top-level comma-separated slices.
fn split_args(tokens: &[Token], start: usize) -> Vec<&[Token]> {
    let mut args = Vec::new();
    let mut depth = 0usize;
    let mut arg_start = start;
    let mut i = start;
    while i < tokens.len() {
        match tokens[i].kind {
            TokenKind::LParen | TokenKind::OpenFn => depth += 1,
            TokenKind::RParen | TokenKind::CloseFn if depth == 0 => break,
            TokenKind::RParen | TokenKind::CloseFn => depth -= 1,
            TokenKind::Comma if depth == 0 => {
                args.push(&tokens[arg_start..i]);
                arg_start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    if i > arg_start || !args.is_empty() {
        args.push(&tokens[arg_start..i]);
    }
    args
}
