//! The query dialect: SQL plus `{{ ... }}` language-model function nodes.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod render;
pub mod validate;
pub mod visit;

pub use ast::*;
pub use parser::parse;
pub use render::{quote_ident, quote_text, render_expr, render_function, render_literal, render_query};
pub use validate::{validate_grammar, Violation, ViolationKind};
