use super::ast::*;
use super::lexer::{syntax_error, tokenize, Token, TokenKind};
use crate::error::{Error, Result, SyntaxError};

/// Words that terminate an expression or clause and therefore never act as
/// a bare alias.
const RESERVED: &[&str] = &[
    "SELECT", "FROM", "WHERE", "GROUP", "BY", "HAVING", "ORDER", "LIMIT", "OFFSET", "JOIN",
    "LEFT", "INNER", "CROSS", "OUTER", "ON", "USING", "AS", "AND", "OR", "NOT", "IN", "IS",
    "NULL", "LIKE", "BETWEEN", "UNION", "INTERSECT", "EXCEPT", "ALL", "DISTINCT", "CASE",
    "WHEN", "THEN", "ELSE", "END", "EXISTS", "VALUES", "WITH", "ASC", "DESC", "CAST", "TRUE",
    "FALSE",
];

fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

/// Parses dialect query text into a normalized [`Query`].
pub fn parse(text: &str) -> Result<Query> {
    if text.trim().is_empty() {
        return Err(Error::Syntax(syntax_error(text, 0, 0, "empty query")));
    }
    let tokens = tokenize(text).map_err(Error::Syntax)?;
    let mut parser = Parser {
        text,
        tokens,
        pos: 0,
        next_id: 0,
    };
    let query = parser.parse_query()?;
    while parser.eat(&TokenKind::Semicolon) {}
    if let Some(tok) = parser.peek() {
        return Err(parser.error_at(tok, "unexpected trailing input"));
    }
    Ok(query)
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    next_id: NodeId,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn peek_nth(&self, n: usize) -> Option<&Token> {
        self.tokens.get(self.pos + n)
    }

    fn advance(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek_kind() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(kw))
    }

    fn at_keyword_n(&self, n: usize, kw: &str) -> bool {
        self.peek_nth(n).is_some_and(|t| t.is_keyword(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error_at(&self, tok: &Token, message: &str) -> Error {
        let found = &self.text[tok.start..tok.end];
        Error::Syntax(syntax_error(
            self.text,
            tok.start,
            tok.end,
            format!("{message} near `{found}`"),
        ))
    }

    fn error_here(&self, message: &str) -> Error {
        match self.peek() {
            Some(tok) => self.error_at(tok, message),
            None => Error::Syntax(syntax_error(
                self.text,
                self.text.len(),
                self.text.len(),
                format!("{message} at end of input"),
            )),
        }
    }

    fn expect(&mut self, kind: &TokenKind, what: &str) -> Result<Token> {
        if self.peek_kind() == Some(kind) {
            Ok(self.advance().expect("peeked"))
        } else {
            Err(self.error_here(&format!("expected {what}")))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error_here(&format!("expected {kw}")))
        }
    }

    fn parse_ident(&mut self) -> Result<Ident> {
        match self.peek_kind() {
            Some(TokenKind::Word(w)) if !is_reserved(w) => {
                let w = w.clone();
                self.pos += 1;
                Ok(Ident::new(w))
            }
            Some(TokenKind::QuotedIdent(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(Ident::quoted(w))
            }
            _ => Err(self.error_here("expected identifier")),
        }
    }

    fn parse_optional_alias(&mut self) -> Result<Option<Ident>> {
        if self.eat_keyword("AS") {
            return self.parse_ident().map(Some);
        }
        match self.peek_kind() {
            Some(TokenKind::Word(w)) if !is_reserved(w) => self.parse_ident().map(Some),
            Some(TokenKind::QuotedIdent(_)) => self.parse_ident().map(Some),
            _ => Ok(None),
        }
    }

    fn at_query_start(&self) -> bool {
        self.at_keyword("SELECT") || self.at_keyword("WITH") || self.at_keyword("VALUES")
    }

    fn parse_query(&mut self) -> Result<Query> {
        let mut with = Vec::new();
        if self.eat_keyword("WITH") {
            loop {
                let name = self.parse_ident()?;
                let mut columns = Vec::new();
                if self.eat(&TokenKind::LParen) {
                    loop {
                        columns.push(self.parse_ident()?);
                        if !self.eat(&TokenKind::Comma) {
                            break;
                        }
                    }
                    self.expect(&TokenKind::RParen, "`)`")?;
                }
                self.expect_keyword("AS")?;
                self.expect(&TokenKind::LParen, "`(`")?;
                let query = self.parse_query()?;
                self.expect(&TokenKind::RParen, "`)`")?;
                with.push(Cte {
                    name,
                    columns,
                    query,
                });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let body = self.parse_set_expr()?;
        let mut order_by = Vec::new();
        if self.at_keyword("ORDER") {
            self.pos += 1;
            self.expect_keyword("BY")?;
            loop {
                let expr = self.parse_expr()?;
                let asc = if self.eat_keyword("ASC") {
                    Some(true)
                } else if self.eat_keyword("DESC") {
                    Some(false)
                } else {
                    None
                };
                order_by.push(OrderByExpr { expr, asc });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let mut limit = None;
        let mut offset = None;
        if self.eat_keyword("LIMIT") {
            let first = self.parse_expr()?;
            if self.eat_keyword("OFFSET") {
                limit = Some(first);
                offset = Some(self.parse_expr()?);
            } else if self.eat(&TokenKind::Comma) {
                offset = Some(first);
                limit = Some(self.parse_expr()?);
            } else {
                limit = Some(first);
            }
        }
        Ok(Query {
            with,
            body,
            order_by,
            limit,
            offset,
        })
    }

    fn parse_set_expr(&mut self) -> Result<SetExpr> {
        let mut left = self.parse_set_primary()?;
        loop {
            let op = if self.at_keyword("UNION") {
                SetOperator::Union
            } else if self.at_keyword("INTERSECT") {
                SetOperator::Intersect
            } else if self.at_keyword("EXCEPT") {
                SetOperator::Except
            } else {
                break;
            };
            self.pos += 1;
            let all = self.eat_keyword("ALL");
            let right = self.parse_set_primary()?;
            left = SetExpr::SetOperation {
                op,
                all,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn parse_set_primary(&mut self) -> Result<SetExpr> {
        if self.eat_keyword("VALUES") {
            let mut rows = Vec::new();
            loop {
                self.expect(&TokenKind::LParen, "`(`")?;
                let row = self.parse_expr_list()?;
                self.expect(&TokenKind::RParen, "`)`")?;
                rows.push(row);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            return Ok(SetExpr::Values(rows));
        }
        self.expect_keyword("SELECT")?;
        self.parse_select_body().map(|s| SetExpr::Select(Box::new(s)))
    }

    fn parse_select_body(&mut self) -> Result<Select> {
        let distinct = if self.eat_keyword("DISTINCT") {
            true
        } else {
            self.eat_keyword("ALL");
            false
        };
        let mut projection = Vec::new();
        loop {
            projection.push(self.parse_select_item()?);
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        let mut from = Vec::new();
        if self.eat_keyword("FROM") {
            loop {
                from.push(self.parse_table_with_joins()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let selection = if self.eat_keyword("WHERE") {
            Some(self.parse_expr()?)
        } else {
            None
        };
        let mut group_by = Vec::new();
        if self.at_keyword("GROUP") {
            self.pos += 1;
            self.expect_keyword("BY")?;
            group_by = self.parse_expr_list()?;
        }
        let having = if self.eat_keyword("HAVING") {
            Some(self.parse_expr()?)
        } else {
            None
        };
        Ok(Select {
            distinct,
            projection,
            from,
            selection,
            group_by,
            having,
        })
    }

    fn parse_select_item(&mut self) -> Result<SelectItem> {
        if self.eat(&TokenKind::Star) {
            return Ok(SelectItem::Wildcard);
        }
        let qualified_star = matches!(
            self.peek_kind(),
            Some(TokenKind::Word(_)) | Some(TokenKind::QuotedIdent(_))
        ) && self.peek_nth(1).map(|t| &t.kind) == Some(&TokenKind::Dot)
            && self.peek_nth(2).map(|t| &t.kind) == Some(&TokenKind::Star);
        if qualified_star {
            let name = self.parse_ident()?;
            self.pos += 2;
            return Ok(SelectItem::QualifiedWildcard(name));
        }
        let expr = self.parse_expr()?;
        let alias = self.parse_optional_alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    fn parse_table_with_joins(&mut self) -> Result<TableWithJoins> {
        let relation = self.parse_table_factor()?;
        let mut joins = Vec::new();
        loop {
            let operator = if self.at_keyword("JOIN") {
                self.pos += 1;
                JoinOperator::Inner
            } else if self.at_keyword("INNER") && self.at_keyword_n(1, "JOIN") {
                self.pos += 2;
                JoinOperator::Inner
            } else if self.at_keyword("LEFT") {
                self.pos += 1;
                self.eat_keyword("OUTER");
                self.expect_keyword("JOIN")?;
                JoinOperator::Left
            } else if self.at_keyword("CROSS") {
                self.pos += 1;
                self.expect_keyword("JOIN")?;
                JoinOperator::Cross
            } else {
                break;
            };
            let relation = self.parse_table_factor()?;
            let constraint = if self.eat_keyword("ON") {
                JoinConstraint::On(self.parse_expr()?)
            } else if self.eat_keyword("USING") {
                self.expect(&TokenKind::LParen, "`(`")?;
                let mut cols = Vec::new();
                loop {
                    cols.push(self.parse_ident()?);
                    if !self.eat(&TokenKind::Comma) {
                        break;
                    }
                }
                self.expect(&TokenKind::RParen, "`)`")?;
                JoinConstraint::Using(cols)
            } else {
                JoinConstraint::None
            };
            joins.push(Join {
                operator,
                relation,
                constraint,
            });
        }
        Ok(TableWithJoins { relation, joins })
    }

    fn parse_table_factor(&mut self) -> Result<TableFactor> {
        if self.at_keyword("VALUES") && self.peek_nth(1).map(|t| &t.kind) == Some(&TokenKind::OpenFn)
        {
            self.pos += 1;
            let function = self.parse_llm_function()?;
            let alias = self.parse_optional_alias()?;
            return Ok(TableFactor::LlmValues {
                function: Box::new(function),
                alias,
            });
        }
        if self.eat(&TokenKind::LParen) {
            if !self.at_query_start() {
                return Err(self.error_here("expected subquery"));
            }
            let subquery = self.parse_query()?;
            self.expect(&TokenKind::RParen, "`)`")?;
            let alias = self.parse_optional_alias()?;
            return Ok(TableFactor::Derived {
                subquery: Box::new(subquery),
                alias,
            });
        }
        let name = self.parse_ident()?;
        let alias = self.parse_optional_alias()?;
        Ok(TableFactor::Table { name, alias })
    }

    fn parse_expr_list(&mut self) -> Result<Vec<Expr>> {
        let mut list = Vec::new();
        loop {
            list.push(self.parse_expr()?);
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        Ok(list)
    }

    pub(crate) fn parse_expr(&mut self) -> Result<Expr> {
        self.parse_or()
    }

    fn parse_or(&mut self) -> Result<Expr> {
        let mut left = self.parse_and()?;
        while self.eat_keyword("OR") {
            let right = self.parse_and()?;
            left = Expr::binary(left, BinaryOp::Or, right);
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> Result<Expr> {
        let mut left = self.parse_not()?;
        while self.eat_keyword("AND") {
            let right = self.parse_not()?;
            left = Expr::binary(left, BinaryOp::And, right);
        }
        Ok(left)
    }

    fn parse_not(&mut self) -> Result<Expr> {
        if self.at_keyword("NOT") && !self.at_keyword_n(1, "EXISTS") {
            self.pos += 1;
            let expr = self.parse_not()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Not,
                expr: Box::new(expr),
            });
        }
        self.parse_equality()
    }

    fn parse_equality(&mut self) -> Result<Expr> {
        let mut left = self.parse_comparison()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Eq) | Some(TokenKind::EqEq) => Some(BinaryOp::Eq),
                Some(TokenKind::NotEq) | Some(TokenKind::LtGt) => Some(BinaryOp::NotEq),
                _ => None,
            };
            if let Some(op) = op {
                self.pos += 1;
                let right = self.parse_comparison()?;
                left = Expr::binary(left, op, right);
                continue;
            }
            if self.at_keyword("IS") {
                self.pos += 1;
                let negated = self.eat_keyword("NOT");
                if self.eat_keyword("NULL") {
                    left = Expr::IsNull {
                        expr: Box::new(left),
                        negated,
                    };
                } else {
                    let right = self.parse_comparison()?;
                    let op = if negated { BinaryOp::IsNot } else { BinaryOp::Is };
                    left = Expr::binary(left, op, right);
                }
                continue;
            }
            let negated = self.at_keyword("NOT")
                && (self.at_keyword_n(1, "IN")
                    || self.at_keyword_n(1, "LIKE")
                    || self.at_keyword_n(1, "BETWEEN"));
            if negated {
                self.pos += 1;
            }
            if self.eat_keyword("IN") {
                let closed = self.parse_in_rhs(left, negated)?;
                left = self.comparison_from(Some(closed))?;
            } else if self.eat_keyword("LIKE") {
                let pattern = self.parse_comparison()?;
                left = Expr::Like {
                    expr: Box::new(left),
                    negated,
                    pattern: Box::new(pattern),
                };
            } else if self.eat_keyword("BETWEEN") {
                // SQLite keeps shifting until the AND, so the low bound may
                // itself be an equality-level expression.
                let low = self.parse_equality()?;
                self.expect_keyword("AND")?;
                let high = self.parse_comparison()?;
                left = Expr::Between {
                    expr: Box::new(left),
                    negated,
                    low: Box::new(low),
                    high: Box::new(high),
                };
            } else {
                break;
            }
        }
        Ok(left)
    }

    fn parse_in_rhs(&mut self, expr: Expr, negated: bool) -> Result<Expr> {
        let expr = Box::new(expr);
        if self.peek_kind() == Some(&TokenKind::OpenFn) {
            let function = self.parse_llm_function()?;
            return Ok(Expr::InFunction {
                expr,
                negated,
                function: Box::new(function),
            });
        }
        self.expect(&TokenKind::LParen, "`(`")?;
        if self.at_query_start() {
            let subquery = self.parse_query()?;
            self.expect(&TokenKind::RParen, "`)`")?;
            return Ok(Expr::InSubquery {
                expr,
                negated,
                subquery: Box::new(subquery),
            });
        }
        let list = if self.peek_kind() == Some(&TokenKind::RParen) {
            Vec::new()
        } else {
            self.parse_expr_list()?
        };
        self.expect(&TokenKind::RParen, "`)`")?;
        Ok(Expr::InList {
            expr,
            negated,
            list,
        })
    }

    fn parse_comparison(&mut self) -> Result<Expr> {
        self.comparison_from(None)
    }

    // The `*_from` variants continue from an operand that was already
    // parsed, e.g. a closed `x IN (...)`, which SQLite lets tighter
    // operators follow.
    fn comparison_from(&mut self, seed: Option<Expr>) -> Result<Expr> {
        let mut left = self.additive_from(seed)?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Lt) => BinaryOp::Lt,
                Some(TokenKind::LtEq) => BinaryOp::LtEq,
                Some(TokenKind::Gt) => BinaryOp::Gt,
                Some(TokenKind::GtEq) => BinaryOp::GtEq,
                _ => break,
            };
            self.pos += 1;
            let right = self.additive_from(None)?;
            left = Expr::binary(left, op, right);
        }
        Ok(left)
    }

    fn additive_from(&mut self, seed: Option<Expr>) -> Result<Expr> {
        let mut left = self.multiplicative_from(seed)?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Plus) => BinaryOp::Plus,
                Some(TokenKind::Minus) => BinaryOp::Minus,
                _ => break,
            };
            self.pos += 1;
            let right = self.multiplicative_from(None)?;
            left = Expr::binary(left, op, right);
        }
        Ok(left)
    }

    fn multiplicative_from(&mut self, seed: Option<Expr>) -> Result<Expr> {
        let mut left = self.concat_from(seed)?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Star) => BinaryOp::Multiply,
                Some(TokenKind::Slash) => BinaryOp::Divide,
                Some(TokenKind::Percent) => BinaryOp::Modulo,
                _ => break,
            };
            self.pos += 1;
            let right = self.concat_from(None)?;
            left = Expr::binary(left, op, right);
        }
        Ok(left)
    }

    fn concat_from(&mut self, seed: Option<Expr>) -> Result<Expr> {
        let mut left = match seed {
            Some(e) => e,
            None => self.parse_unary()?,
        };
        while self.eat(&TokenKind::Concat) {
            let right = self.parse_unary()?;
            left = Expr::binary(left, BinaryOp::Concat, right);
        }
        Ok(left)
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        let op = match self.peek_kind() {
            Some(TokenKind::Minus) => UnaryOp::Minus,
            Some(TokenKind::Plus) => UnaryOp::Plus,
            _ => return self.parse_primary(),
        };
        self.pos += 1;
        let expr = self.parse_unary()?;
        Ok(Expr::Unary {
            op,
            expr: Box::new(expr),
        })
    }

    fn parse_number(&self, tok: &Token, text: &str) -> Result<Literal> {
        let is_real = text.contains(['.', 'e', 'E']);
        if !is_real {
            if let Ok(i) = text.parse::<i64>() {
                return Ok(Literal::Integer(i));
            }
        }
        text.parse::<f64>()
            .map(Literal::Real)
            .map_err(|_| self.error_at(tok, "malformed number"))
    }

    fn parse_primary(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error_here("expected expression"));
        };
        match &tok.kind {
            TokenKind::Number(n) => {
                self.pos += 1;
                Ok(Expr::Literal(self.parse_number(&tok, n)?))
            }
            TokenKind::String(s) => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::Text(s.clone())))
            }
            TokenKind::OpenFn => Ok(Expr::Llm(Box::new(self.parse_llm_function()?))),
            TokenKind::LParen => {
                self.pos += 1;
                if self.at_query_start() {
                    let q = self.parse_query()?;
                    self.expect(&TokenKind::RParen, "`)`")?;
                    Ok(Expr::Subquery(Box::new(q)))
                } else {
                    let e = self.parse_expr()?;
                    self.expect(&TokenKind::RParen, "`)`")?;
                    Ok(e)
                }
            }
            TokenKind::Word(w) => {
                let upper = w.to_ascii_uppercase();
                match upper.as_str() {
                    "NULL" => {
                        self.pos += 1;
                        Ok(Expr::Literal(Literal::Null))
                    }
                    "TRUE" | "FALSE" => {
                        self.pos += 1;
                        Ok(Expr::Literal(Literal::Bool(upper == "TRUE")))
                    }
                    "CAST" => self.parse_cast(),
                    "CASE" => self.parse_case(),
                    "EXISTS" => {
                        self.pos += 1;
                        self.parse_exists(false)
                    }
                    "NOT" if self.at_keyword_n(1, "EXISTS") => {
                        self.pos += 2;
                        self.parse_exists(true)
                    }
                    _ if is_reserved(w) => Err(self.error_at(&tok, "expected expression")),
                    _ => self.parse_name_expr(),
                }
            }
            TokenKind::QuotedIdent(_) => self.parse_name_expr(),
            _ => Err(self.error_at(&tok, "expected expression")),
        }
    }

    fn parse_exists(&mut self, negated: bool) -> Result<Expr> {
        self.expect(&TokenKind::LParen, "`(`")?;
        let subquery = self.parse_query()?;
        self.expect(&TokenKind::RParen, "`)`")?;
        Ok(Expr::Exists {
            negated,
            subquery: Box::new(subquery),
        })
    }

    fn parse_cast(&mut self) -> Result<Expr> {
        self.pos += 1;
        self.expect(&TokenKind::LParen, "`(`")?;
        let expr = self.parse_expr()?;
        self.expect_keyword("AS")?;
        let mut words = Vec::new();
        while let Some(TokenKind::Word(w)) = self.peek_kind() {
            words.push(w.to_ascii_uppercase());
            self.pos += 1;
        }
        if words.is_empty() {
            return Err(self.error_here("expected type name"));
        }
        let mut type_name = words.join(" ");
        if self.eat(&TokenKind::LParen) {
            let mut parts = Vec::new();
            loop {
                match self.advance() {
                    Some(Token {
                        kind: TokenKind::Number(n),
                        ..
                    }) => parts.push(n),
                    _ => return Err(self.error_here("expected type size")),
                }
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            self.expect(&TokenKind::RParen, "`)`")?;
            type_name = format!("{type_name}({})", parts.join(", "));
        }
        self.expect(&TokenKind::RParen, "`)`")?;
        Ok(Expr::Cast {
            expr: Box::new(expr),
            type_name,
        })
    }

    fn parse_case(&mut self) -> Result<Expr> {
        self.pos += 1;
        let operand = if self.at_keyword("WHEN") {
            None
        } else {
            Some(Box::new(self.parse_expr()?))
        };
        let mut branches = Vec::new();
        while self.eat_keyword("WHEN") {
            let cond = self.parse_expr()?;
            self.expect_keyword("THEN")?;
            let result = self.parse_expr()?;
            branches.push((cond, result));
        }
        if branches.is_empty() {
            return Err(self.error_here("expected WHEN"));
        }
        let else_result = if self.eat_keyword("ELSE") {
            Some(Box::new(self.parse_expr()?))
        } else {
            None
        };
        self.expect_keyword("END")?;
        Ok(Expr::Case {
            operand,
            branches,
            else_result,
        })
    }

    /// Column reference or native function call.
    fn parse_name_expr(&mut self) -> Result<Expr> {
        let first = self.parse_ident()?;
        if !first.quoted && self.peek_kind() == Some(&TokenKind::LParen) {
            self.pos += 1;
            let args = if self.eat(&TokenKind::Star) {
                FunctionArgs::Star
            } else if self.peek_kind() == Some(&TokenKind::RParen) {
                FunctionArgs::List {
                    distinct: false,
                    args: Vec::new(),
                }
            } else {
                let distinct = self.eat_keyword("DISTINCT");
                FunctionArgs::List {
                    distinct,
                    args: self.parse_expr_list()?,
                }
            };
            self.expect(&TokenKind::RParen, "`)`")?;
            return Ok(Expr::Function(FunctionCall { name: first, args }));
        }
        if self.eat(&TokenKind::Dot) {
            let column = self.parse_ident()?;
            return Ok(Expr::Column(ColumnRef {
                table: Some(first),
                column,
            }));
        }
        Ok(Expr::Column(ColumnRef {
            table: None,
            column: first,
        }))
    }

    fn parse_llm_function(&mut self) -> Result<LlmFunction> {
        let open = self.expect(&TokenKind::OpenFn, "`{{`")?;
        let id = self.next_id;
        self.next_id += 1;
        let name_tok = self.peek().cloned();
        let kind = match self.peek_kind() {
            Some(TokenKind::Word(w)) => FunctionKind::from_name(w),
            _ => None,
        };
        let Some(kind) = kind else {
            return Err(self.error_here("expected LLMQA, LLMMap or LLMSearchMap"));
        };
        self.pos += 1;
        self.expect(&TokenKind::LParen, "`(`")?;
        let question_tok = self.peek().cloned();
        let question = match self.advance() {
            Some(Token {
                kind: TokenKind::String(s),
                ..
            }) => s,
            _ => {
                return Err(match &question_tok {
                    Some(t) => self.error_at(t, "function question must be a quoted string"),
                    None => self.error_here("function question must be a quoted string"),
                })
            }
        };
        let question_tok = question_tok.expect("consumed above");
        check_placeholders(self.text, &question_tok, &question)?;

        let mut function = LlmFunction {
            id,
            kind,
            question,
            args: Vec::new(),
            options: None,
            quantifier: None,
            search: None,
        };
        while self.eat(&TokenKind::Comma) {
            let is_kwarg = matches!(self.peek_kind(), Some(TokenKind::Word(_)))
                && self.peek_nth(1).map(|t| &t.kind) == Some(&TokenKind::Eq);
            if is_kwarg {
                self.parse_kwarg(&mut function)?;
            } else {
                if function.options.is_some()
                    || function.quantifier.is_some()
                    || function.search.is_some()
                {
                    return Err(self.error_here("positional argument after keyword argument"));
                }
                let arg = self.parse_function_arg()?;
                function.args.push(arg);
            }
        }
        self.expect(&TokenKind::RParen, "`)`")?;
        self.expect(&TokenKind::CloseFn, "`}}`")?;
        let name_tok = name_tok.expect("peeked above");
        self.check_function_shape(&function, &open, &name_tok)?;
        Ok(function)
    }

    fn parse_kwarg(&mut self, function: &mut LlmFunction) -> Result<()> {
        let key_tok = self.advance().expect("peeked");
        let TokenKind::Word(key) = &key_tok.kind else {
            unreachable!("kwarg key is a word")
        };
        self.pos += 1; // `=`
        match key.to_ascii_lowercase().as_str() {
            "options" => {
                function.options = Some(self.parse_function_arg()?);
            }
            "quantifier" => {
                let tok = self.advance();
                let Some(Token {
                    kind: TokenKind::String(s),
                    ..
                }) = tok
                else {
                    return Err(self.error_at(&key_tok, "quantifier must be a quoted string"));
                };
                let q = Quantifier::parse(&s).ok_or_else(|| {
                    self.error_at(&key_tok, &format!("malformed quantifier `{s}`"))
                })?;
                function.quantifier = Some(q);
            }
            "store" => {
                let Some(Token {
                    kind: TokenKind::String(s),
                    ..
                }) = self.advance()
                else {
                    return Err(self.error_at(&key_tok, "store must be a quoted string"));
                };
                function.search.get_or_insert_with(Default::default).store = Some(s);
            }
            "k" => {
                let Some(Token {
                    kind: TokenKind::Number(n),
                    ..
                }) = self.advance()
                else {
                    return Err(self.error_at(&key_tok, "k must be a positive integer"));
                };
                let k: usize = n
                    .parse()
                    .ok()
                    .filter(|k| *k >= 1)
                    .ok_or_else(|| self.error_at(&key_tok, "k must be a positive integer"))?;
                function.search.get_or_insert_with(Default::default).k = Some(k);
            }
            _ => return Err(self.error_at(&key_tok, "unknown keyword argument")),
        }
        Ok(())
    }

    fn parse_function_arg(&mut self) -> Result<FunctionArg> {
        if self.peek_kind() == Some(&TokenKind::LParen)
            && self.peek_nth(1).is_some_and(|t| {
                t.is_keyword("SELECT") || t.is_keyword("WITH") || t.is_keyword("VALUES")
            })
        {
            self.pos += 1;
            let q = self.parse_query()?;
            self.expect(&TokenKind::RParen, "`)`")?;
            return Ok(FunctionArg::Subquery(Box::new(q)));
        }
        match self.parse_expr()? {
            Expr::Column(c) => Ok(FunctionArg::Column(c)),
            Expr::Literal(l) => Ok(FunctionArg::Literal(l)),
            Expr::Unary {
                op: UnaryOp::Minus,
                expr,
            } => match *expr {
                Expr::Literal(Literal::Integer(i)) => Ok(FunctionArg::Literal(Literal::Integer(-i))),
                Expr::Literal(Literal::Real(r)) => Ok(FunctionArg::Literal(Literal::Real(-r))),
                _ => Err(self.error_here("function arguments must be subqueries, columns or literals")),
            },
            _ => Err(self.error_here("function arguments must be subqueries, columns or literals")),
        }
    }

    fn check_function_shape(&self, f: &LlmFunction, open: &Token, name: &Token) -> Result<()> {
        let err = |msg: String| Error::Syntax(syntax_error(self.text, open.start, name.end, msg));
        let placeholders = f.placeholder_count();
        if f.kind.is_map() {
            let columns: Vec<&ColumnRef> = f
                .args
                .iter()
                .filter_map(|a| match a {
                    FunctionArg::Column(c) => Some(c),
                    _ => None,
                })
                .collect();
            if f.args.len() != 1 || columns.len() != 1 || columns[0].table.is_none() {
                return Err(err(format!(
                    "{} requires exactly one `table.column` argument",
                    f.kind
                )));
            }
            if f.options.is_some() || f.quantifier.is_some() {
                return Err(err(format!("{} does not accept options or quantifier", f.kind)));
            }
            if placeholders > 1 {
                return Err(Error::FStringSyntax(syntax_error(
                    self.text,
                    open.start,
                    name.end,
                    format!("{} question may contain at most one `{{}}`", f.kind),
                )));
            }
        } else {
            let values = f.non_column_args();
            if placeholders > 0 && placeholders != values {
                return Err(Error::FStringSyntax(syntax_error(
                    self.text,
                    open.start,
                    name.end,
                    format!(
                        "question has {placeholders} `{{}}` placeholders but {values} value arguments"
                    ),
                )));
            }
        }
        if f.kind == FunctionKind::Map && f.search.is_some() {
            return Err(err("LLMMap does not accept store or k; use LLMSearchMap".into()));
        }
        Ok(())
    }
}

/// Only positional `{}` placeholders are legal inside a question.
fn check_placeholders(text: &str, tok: &Token, question: &str) -> Result<()> {
    let mut chars = question.chars().peekable();
    while let Some(c) = chars.next() {
        let bad = match c {
            '{' => chars.next() != Some('}'),
            '}' => true,
            _ => false,
        };
        if bad {
            return Err(Error::FStringSyntax(SyntaxError {
                message: format!("malformed placeholder in {question:?}; only `{{}}` is supported"),
                span: crate::error::Span::locate(text, tok.start, tok.end),
            }));
        }
    }
    Ok(())
}
