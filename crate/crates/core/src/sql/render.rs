//! Canonical text form of the syntax tree. Rendering a parsed query and
//! parsing the result again yields an equal tree.

use std::fmt::Write;

use super::ast::*;

pub fn render_query(q: &Query) -> String {
    let mut out = String::new();
    write_query(&mut out, q);
    out
}

pub fn render_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

pub fn render_function(f: &LlmFunction) -> String {
    let mut out = String::new();
    write_function(&mut out, f);
    out
}

pub fn quote_text(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

pub fn quote_ident(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn write_ident(out: &mut String, id: &Ident) {
    if id.quoted || !is_plain_ident(&id.value) {
        out.push_str(&quote_ident(&id.value));
    } else {
        out.push_str(&id.value);
    }
}

fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}

pub fn render_literal(l: &Literal) -> String {
    match l {
        Literal::Null => "NULL".into(),
        Literal::Bool(true) => "TRUE".into(),
        Literal::Bool(false) => "FALSE".into(),
        Literal::Integer(i) => i.to_string(),
        Literal::Real(r) => format!("{r:?}"),
        Literal::Text(s) => quote_text(s),
    }
}

fn write_query(out: &mut String, q: &Query) {
    if !q.with.is_empty() {
        out.push_str("WITH ");
        for (i, cte) in q.with.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_ident(out, &cte.name);
            if !cte.columns.is_empty() {
                out.push_str(" (");
                for (j, c) in cte.columns.iter().enumerate() {
                    if j > 0 {
                        out.push_str(", ");
                    }
                    write_ident(out, c);
                }
                out.push(')');
            }
            out.push_str(" AS (");
            write_query(out, &cte.query);
            out.push(')');
        }
        out.push(' ');
    }
    write_set_expr(out, &q.body);
    if !q.order_by.is_empty() {
        out.push_str(" ORDER BY ");
        for (i, o) in q.order_by.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_expr(out, &o.expr);
            match o.asc {
                Some(true) => out.push_str(" ASC"),
                Some(false) => out.push_str(" DESC"),
                None => {}
            }
        }
    }
    if let Some(limit) = &q.limit {
        out.push_str(" LIMIT ");
        write_expr(out, limit);
    }
    if let Some(offset) = &q.offset {
        if q.limit.is_none() {
            out.push_str(" LIMIT -1");
        }
        out.push_str(" OFFSET ");
        write_expr(out, offset);
    }
}

fn write_set_expr(out: &mut String, s: &SetExpr) {
    match s {
        SetExpr::Select(sel) => write_select(out, sel),
        SetExpr::Values(rows) => {
            out.push_str("VALUES ");
            for (i, row) in rows.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push('(');
                write_expr_list(out, row);
                out.push(')');
            }
        }
        SetExpr::SetOperation {
            op,
            all,
            left,
            right,
        } => {
            write_set_expr(out, left);
            out.push_str(match op {
                SetOperator::Union => " UNION ",
                SetOperator::Intersect => " INTERSECT ",
                SetOperator::Except => " EXCEPT ",
            });
            if *all {
                out.push_str("ALL ");
            }
            write_set_expr(out, right);
        }
    }
}

fn write_select(out: &mut String, s: &Select) {
    out.push_str("SELECT ");
    if s.distinct {
        out.push_str("DISTINCT ");
    }
    for (i, item) in s.projection.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match item {
            SelectItem::Wildcard => out.push('*'),
            SelectItem::QualifiedWildcard(t) => {
                write_ident(out, t);
                out.push_str(".*");
            }
            SelectItem::Expr { expr, alias } => {
                write_expr(out, expr);
                if let Some(a) = alias {
                    out.push_str(" AS ");
                    write_ident(out, a);
                }
            }
        }
    }
    if !s.from.is_empty() {
        out.push_str(" FROM ");
        for (i, t) in s.from.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_table_with_joins(out, t);
        }
    }
    if let Some(w) = &s.selection {
        out.push_str(" WHERE ");
        write_expr(out, w);
    }
    if !s.group_by.is_empty() {
        out.push_str(" GROUP BY ");
        write_expr_list(out, &s.group_by);
    }
    if let Some(h) = &s.having {
        out.push_str(" HAVING ");
        write_expr(out, h);
    }
}

pub(crate) fn write_table_with_joins(out: &mut String, t: &TableWithJoins) {
    write_table_factor(out, &t.relation);
    for j in &t.joins {
        out.push_str(match j.operator {
            JoinOperator::Inner => " JOIN ",
            JoinOperator::Left => " LEFT JOIN ",
            JoinOperator::Cross => " CROSS JOIN ",
        });
        write_table_factor(out, &j.relation);
        match &j.constraint {
            JoinConstraint::On(e) => {
                out.push_str(" ON ");
                write_expr(out, e);
            }
            JoinConstraint::Using(cols) => {
                out.push_str(" USING (");
                for (i, c) in cols.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_ident(out, c);
                }
                out.push(')');
            }
            JoinConstraint::None => {}
        }
    }
}

fn write_alias(out: &mut String, alias: &Option<Ident>) {
    if let Some(a) = alias {
        out.push_str(" AS ");
        write_ident(out, a);
    }
}

fn write_table_factor(out: &mut String, t: &TableFactor) {
    match t {
        TableFactor::Table { name, alias } => {
            write_ident(out, name);
            write_alias(out, alias);
        }
        TableFactor::Derived { subquery, alias } => {
            out.push('(');
            write_query(out, subquery);
            out.push(')');
            write_alias(out, alias);
        }
        TableFactor::LlmValues { function, alias } => {
            out.push_str("VALUES ");
            write_function(out, function);
            write_alias(out, alias);
        }
    }
}

fn write_expr_list(out: &mut String, list: &[Expr]) {
    for (i, e) in list.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, e);
    }
}

/// Writes `e`, parenthesized when it binds looser than `min`.
fn write_operand(out: &mut String, e: &Expr, min: u8) {
    if e.precedence() < min {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_column(out: &mut String, c: &ColumnRef) {
    if let Some(t) = &c.table {
        write_ident(out, t);
        out.push('.');
    }
    write_ident(out, &c.column);
}

fn write_not(out: &mut String, negated: bool) {
    if negated {
        out.push_str(" NOT");
    }
}

pub(crate) fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Literal(l) => {
            // Negative numbers only arise from spliced values; keep them
            // atomic so surrounding operators bind as intended.
            let s = render_literal(l);
            if s.starts_with('-') {
                let _ = write!(out, "({s})");
            } else {
                out.push_str(&s);
            }
        }
        Expr::Column(c) => write_column(out, c),
        Expr::Unary { op, expr } => match op {
            UnaryOp::Not => {
                out.push_str("NOT ");
                write_operand(out, expr, 3);
            }
            UnaryOp::Minus | UnaryOp::Plus => {
                out.push(if *op == UnaryOp::Minus { '-' } else { '+' });
                if matches!(expr.as_ref(), Expr::Unary { .. })
                    || matches!(expr.as_ref(), Expr::Literal(Literal::Integer(i)) if *i < 0)
                    || matches!(expr.as_ref(), Expr::Literal(Literal::Real(r)) if r.is_sign_negative())
                {
                    out.push('(');
                    write_expr(out, expr);
                    out.push(')');
                } else {
                    write_operand(out, expr, 10);
                }
            }
        },
        Expr::Binary { left, op, right } => {
            let p = op.precedence();
            write_operand(out, left, p);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_operand(out, right, p + 1);
        }
        Expr::Like {
            expr,
            negated,
            pattern,
        } => {
            write_operand(out, expr, 4);
            write_not(out, *negated);
            out.push_str(" LIKE ");
            write_operand(out, pattern, 5);
        }
        Expr::Between {
            expr,
            negated,
            low,
            high,
        } => {
            write_operand(out, expr, 4);
            write_not(out, *negated);
            out.push_str(" BETWEEN ");
            write_operand(out, low, 5);
            out.push_str(" AND ");
            write_operand(out, high, 5);
        }
        Expr::InList {
            expr,
            negated,
            list,
        } => {
            write_operand(out, expr, 4);
            write_not(out, *negated);
            out.push_str(" IN (");
            write_expr_list(out, list);
            out.push(')');
        }
        Expr::InSubquery {
            expr,
            negated,
            subquery,
        } => {
            write_operand(out, expr, 4);
            write_not(out, *negated);
            out.push_str(" IN (");
            write_query(out, subquery);
            out.push(')');
        }
        Expr::InFunction {
            expr,
            negated,
            function,
        } => {
            write_operand(out, expr, 4);
            write_not(out, *negated);
            out.push_str(" IN ");
            write_function(out, function);
        }
        Expr::IsNull { expr, negated } => {
            write_operand(out, expr, 4);
            out.push_str(if *negated { " IS NOT NULL" } else { " IS NULL" });
        }
        Expr::Function(call) => {
            write_ident(out, &call.name);
            out.push('(');
            match &call.args {
                FunctionArgs::Star => out.push('*'),
                FunctionArgs::List { distinct, args } => {
                    if *distinct {
                        out.push_str("DISTINCT ");
                    }
                    write_expr_list(out, args);
                }
            }
            out.push(')');
        }
        Expr::Cast { expr, type_name } => {
            out.push_str("CAST(");
            write_expr(out, expr);
            let _ = write!(out, " AS {type_name})");
        }
        Expr::Case {
            operand,
            branches,
            else_result,
        } => {
            out.push_str("CASE");
            if let Some(o) = operand {
                out.push(' ');
                write_expr(out, o);
            }
            for (cond, result) in branches {
                out.push_str(" WHEN ");
                write_expr(out, cond);
                out.push_str(" THEN ");
                write_expr(out, result);
            }
            if let Some(e) = else_result {
                out.push_str(" ELSE ");
                write_expr(out, e);
            }
            out.push_str(" END");
        }
        Expr::Subquery(q) => {
            out.push('(');
            write_query(out, q);
            out.push(')');
        }
        Expr::Exists { negated, subquery } => {
            if *negated {
                out.push_str("NOT ");
            }
            out.push_str("EXISTS (");
            write_query(out, subquery);
            out.push(')');
        }
        Expr::Llm(f) => write_function(out, f),
    }
}

fn write_function_arg(out: &mut String, a: &FunctionArg) {
    match a {
        FunctionArg::Subquery(q) => {
            out.push('(');
            write_query(out, q);
            out.push(')');
        }
        FunctionArg::Column(c) => write_column(out, c),
        FunctionArg::Literal(l) => out.push_str(&render_literal(l)),
    }
}

fn write_function(out: &mut String, f: &LlmFunction) {
    let _ = write!(out, "{{{{{}({}", f.kind.name(), quote_text(&f.question));
    for a in &f.args {
        out.push_str(", ");
        write_function_arg(out, a);
    }
    if let Some(o) = &f.options {
        out.push_str(", options=");
        write_function_arg(out, o);
    }
    if let Some(q) = &f.quantifier {
        let _ = write!(out, ", quantifier={}", quote_text(&q.to_string()));
    }
    if let Some(s) = &f.search {
        if let Some(store) = &s.store {
            let _ = write!(out, ", store={}", quote_text(store));
        }
        if let Some(k) = s.k {
            let _ = write!(out, ", k={k}");
        }
    }
    out.push_str(")}}");
}
