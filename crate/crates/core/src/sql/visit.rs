//! Traversal helpers over the syntax tree.

use super::ast::*;

/// Every function node in syntax (pre-order) order.
pub fn functions(q: &Query) -> Vec<&LlmFunction> {
    let mut out = Vec::new();
    collect_query(q, &mut out);
    out
}

pub fn query_has_functions(q: &Query) -> bool {
    !functions(q).is_empty()
}

pub fn expr_has_functions(e: &Expr) -> bool {
    let mut out = Vec::new();
    collect_expr(e, &mut out);
    !out.is_empty()
}

pub fn function_has_nested(f: &LlmFunction) -> bool {
    let mut out = Vec::new();
    collect_function_args(f, &mut out);
    !out.is_empty()
}

fn collect_query<'a>(q: &'a Query, out: &mut Vec<&'a LlmFunction>) {
    for cte in &q.with {
        collect_query(&cte.query, out);
    }
    collect_set_expr(&q.body, out);
    for o in &q.order_by {
        collect_expr(&o.expr, out);
    }
    if let Some(l) = &q.limit {
        collect_expr(l, out);
    }
    if let Some(o) = &q.offset {
        collect_expr(o, out);
    }
}

fn collect_set_expr<'a>(s: &'a SetExpr, out: &mut Vec<&'a LlmFunction>) {
    match s {
        SetExpr::Select(sel) => collect_select(sel, out),
        SetExpr::Values(rows) => rows.iter().flatten().for_each(|e| collect_expr(e, out)),
        SetExpr::SetOperation { left, right, .. } => {
            collect_set_expr(left, out);
            collect_set_expr(right, out);
        }
    }
}

fn collect_select<'a>(s: &'a Select, out: &mut Vec<&'a LlmFunction>) {
    for item in &s.projection {
        if let SelectItem::Expr { expr, .. } = item {
            collect_expr(expr, out);
        }
    }
    for t in &s.from {
        collect_table_with_joins(t, out);
    }
    if let Some(w) = &s.selection {
        collect_expr(w, out);
    }
    for g in &s.group_by {
        collect_expr(g, out);
    }
    if let Some(h) = &s.having {
        collect_expr(h, out);
    }
}

fn collect_table_with_joins<'a>(t: &'a TableWithJoins, out: &mut Vec<&'a LlmFunction>) {
    collect_table_factor(&t.relation, out);
    for j in &t.joins {
        collect_table_factor(&j.relation, out);
        if let JoinConstraint::On(e) = &j.constraint {
            collect_expr(e, out);
        }
    }
}

fn collect_table_factor<'a>(t: &'a TableFactor, out: &mut Vec<&'a LlmFunction>) {
    match t {
        TableFactor::Table { .. } => {}
        TableFactor::Derived { subquery, .. } => collect_query(subquery, out),
        TableFactor::LlmValues { function, .. } => collect_function(function, out),
    }
}

fn collect_function<'a>(f: &'a LlmFunction, out: &mut Vec<&'a LlmFunction>) {
    out.push(f);
    collect_function_args(f, out);
}

fn collect_function_args<'a>(f: &'a LlmFunction, out: &mut Vec<&'a LlmFunction>) {
    for a in f.args.iter().chain(f.options.iter()) {
        if let FunctionArg::Subquery(q) = a {
            collect_query(q, out);
        }
    }
}

fn collect_expr<'a>(e: &'a Expr, out: &mut Vec<&'a LlmFunction>) {
    match e {
        Expr::Literal(_) | Expr::Column(_) => {}
        Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::Cast { expr, .. } => {
            collect_expr(expr, out)
        }
        Expr::Binary { left, right, .. } => {
            collect_expr(left, out);
            collect_expr(right, out);
        }
        Expr::Like { expr, pattern, .. } => {
            collect_expr(expr, out);
            collect_expr(pattern, out);
        }
        Expr::Between { expr, low, high, .. } => {
            collect_expr(expr, out);
            collect_expr(low, out);
            collect_expr(high, out);
        }
        Expr::InList { expr, list, .. } => {
            collect_expr(expr, out);
            list.iter().for_each(|e| collect_expr(e, out));
        }
        Expr::InSubquery { expr, subquery, .. } => {
            collect_expr(expr, out);
            collect_query(subquery, out);
        }
        Expr::InFunction { expr, function, .. } => {
            collect_expr(expr, out);
            collect_function(function, out);
        }
        Expr::Function(call) => {
            if let FunctionArgs::List { args, .. } = &call.args {
                args.iter().for_each(|e| collect_expr(e, out));
            }
        }
        Expr::Case {
            operand,
            branches,
            else_result,
        } => {
            if let Some(o) = operand {
                collect_expr(o, out);
            }
            for (c, r) in branches {
                collect_expr(c, out);
                collect_expr(r, out);
            }
            if let Some(e) = else_result {
                collect_expr(e, out);
            }
        }
        Expr::Subquery(q) | Expr::Exists { subquery: q, .. } => collect_query(q, out),
        Expr::Llm(f) => collect_function(f, out),
    }
}

/// Names of base tables referenced anywhere inside `q`, in syntax order,
/// without duplicates.
pub fn table_names(q: &Query) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut q = q.clone();
    for_each_table_factor_mut(&mut q, &mut |t| {
        if let TableFactor::Table { name, .. } = t {
            if !out.iter().any(|n| name.matches(n)) {
                out.push(name.value.clone());
            }
        }
    });
    out
}

/// Applies `f` to every expression in the query tree, children before
/// parents, descending into nested queries and function arguments.
pub fn for_each_expr_mut(q: &mut Query, f: &mut dyn FnMut(&mut Expr)) {
    for cte in &mut q.with {
        for_each_expr_mut(&mut cte.query, f);
    }
    set_expr_exprs_mut(&mut q.body, f);
    for o in &mut q.order_by {
        expr_mut(&mut o.expr, f);
    }
    if let Some(l) = &mut q.limit {
        expr_mut(l, f);
    }
    if let Some(o) = &mut q.offset {
        expr_mut(o, f);
    }
}

fn set_expr_exprs_mut(s: &mut SetExpr, f: &mut dyn FnMut(&mut Expr)) {
    match s {
        SetExpr::Select(sel) => select_exprs_mut(sel, f),
        SetExpr::Values(rows) => rows.iter_mut().flatten().for_each(|e| expr_mut(e, f)),
        SetExpr::SetOperation { left, right, .. } => {
            set_expr_exprs_mut(left, f);
            set_expr_exprs_mut(right, f);
        }
    }
}

fn select_exprs_mut(s: &mut Select, f: &mut dyn FnMut(&mut Expr)) {
    for item in &mut s.projection {
        if let SelectItem::Expr { expr, .. } = item {
            expr_mut(expr, f);
        }
    }
    for t in &mut s.from {
        table_factor_exprs_mut(&mut t.relation, f);
        for j in &mut t.joins {
            table_factor_exprs_mut(&mut j.relation, f);
            if let JoinConstraint::On(e) = &mut j.constraint {
                expr_mut(e, f);
            }
        }
    }
    if let Some(w) = &mut s.selection {
        expr_mut(w, f);
    }
    for g in &mut s.group_by {
        expr_mut(g, f);
    }
    if let Some(h) = &mut s.having {
        expr_mut(h, f);
    }
}

fn table_factor_exprs_mut(t: &mut TableFactor, f: &mut dyn FnMut(&mut Expr)) {
    match t {
        TableFactor::Table { .. } => {}
        TableFactor::Derived { subquery, .. } => for_each_expr_mut(subquery, f),
        TableFactor::LlmValues { function, .. } => function_args_mut(function, f),
    }
}

fn function_args_mut(func: &mut LlmFunction, f: &mut dyn FnMut(&mut Expr)) {
    for a in func.args.iter_mut().chain(func.options.iter_mut()) {
        if let FunctionArg::Subquery(q) = a {
            for_each_expr_mut(q, f);
        }
    }
}

fn expr_mut(e: &mut Expr, f: &mut dyn FnMut(&mut Expr)) {
    match e {
        Expr::Literal(_) | Expr::Column(_) => {}
        Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::Cast { expr, .. } => {
            expr_mut(expr, f)
        }
        Expr::Binary { left, right, .. } => {
            expr_mut(left, f);
            expr_mut(right, f);
        }
        Expr::Like { expr, pattern, .. } => {
            expr_mut(expr, f);
            expr_mut(pattern, f);
        }
        Expr::Between { expr, low, high, .. } => {
            expr_mut(expr, f);
            expr_mut(low, f);
            expr_mut(high, f);
        }
        Expr::InList { expr, list, .. } => {
            expr_mut(expr, f);
            list.iter_mut().for_each(|e| expr_mut(e, f));
        }
        Expr::InSubquery { expr, subquery, .. } => {
            expr_mut(expr, f);
            for_each_expr_mut(subquery, f);
        }
        Expr::InFunction { expr, function, .. } => {
            expr_mut(expr, f);
            function_args_mut(function, f);
        }
        Expr::Function(call) => {
            if let FunctionArgs::List { args, .. } = &mut call.args {
                args.iter_mut().for_each(|e| expr_mut(e, f));
            }
        }
        Expr::Case {
            operand,
            branches,
            else_result,
        } => {
            if let Some(o) = operand {
                expr_mut(o, f);
            }
            for (c, r) in branches {
                expr_mut(c, f);
                expr_mut(r, f);
            }
            if let Some(e) = else_result {
                expr_mut(e, f);
            }
        }
        Expr::Subquery(q) | Expr::Exists { subquery: q, .. } => for_each_expr_mut(q, f),
        Expr::Llm(func) => function_args_mut(func, f),
    }
    f(e);
}

/// Applies `f` to every query node, outermost first.
pub fn for_each_query_mut(q: &mut Query, f: &mut dyn FnMut(&mut Query)) {
    f(q);
    child_queries_mut(q, &mut |child| for_each_query_mut(child, f));
}

/// Applies `f` to the queries nested directly in `q` (CTE bodies, derived
/// tables, subquery expressions and function arguments), not to their own
/// descendants.
pub fn child_queries_mut(q: &mut Query, f: &mut dyn FnMut(&mut Query)) {
    for cte in &mut q.with {
        f(&mut cte.query);
    }
    set_expr_child_queries(&mut q.body, f);
    for o in &mut q.order_by {
        direct_expr_queries(&mut o.expr, f);
    }
    if let Some(l) = &mut q.limit {
        direct_expr_queries(l, f);
    }
    if let Some(o) = &mut q.offset {
        direct_expr_queries(o, f);
    }
}

fn set_expr_child_queries(s: &mut SetExpr, f: &mut dyn FnMut(&mut Query)) {
    match s {
        SetExpr::Select(sel) => {
            for item in &mut sel.projection {
                if let SelectItem::Expr { expr, .. } = item {
                    direct_expr_queries(expr, f);
                }
            }
            for t in &mut sel.from {
                table_factor_child_queries(&mut t.relation, f);
                for j in &mut t.joins {
                    table_factor_child_queries(&mut j.relation, f);
                    if let JoinConstraint::On(e) = &mut j.constraint {
                        direct_expr_queries(e, f);
                    }
                }
            }
            if let Some(w) = &mut sel.selection {
                direct_expr_queries(w, f);
            }
            for g in &mut sel.group_by {
                direct_expr_queries(g, f);
            }
            if let Some(h) = &mut sel.having {
                direct_expr_queries(h, f);
            }
        }
        SetExpr::Values(rows) => rows.iter_mut().flatten().for_each(|e| direct_expr_queries(e, f)),
        SetExpr::SetOperation { left, right, .. } => {
            set_expr_child_queries(left, f);
            set_expr_child_queries(right, f);
        }
    }
}

fn table_factor_child_queries(t: &mut TableFactor, f: &mut dyn FnMut(&mut Query)) {
    match t {
        TableFactor::Table { .. } => {}
        TableFactor::Derived { subquery, .. } => f(subquery),
        TableFactor::LlmValues { function, .. } => function_child_queries(function, f),
    }
}

fn function_child_queries(func: &mut LlmFunction, f: &mut dyn FnMut(&mut Query)) {
    for a in func.args.iter_mut().chain(func.options.iter_mut()) {
        if let FunctionArg::Subquery(q) = a {
            f(q);
        }
    }
}

fn direct_expr_queries(e: &mut Expr, f: &mut dyn FnMut(&mut Query)) {
    match e {
        Expr::Literal(_) | Expr::Column(_) => {}
        Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::Cast { expr, .. } => {
            direct_expr_queries(expr, f)
        }
        Expr::Binary { left, right, .. } => {
            direct_expr_queries(left, f);
            direct_expr_queries(right, f);
        }
        Expr::Like { expr, pattern, .. } => {
            direct_expr_queries(expr, f);
            direct_expr_queries(pattern, f);
        }
        Expr::Between { expr, low, high, .. } => {
            direct_expr_queries(expr, f);
            direct_expr_queries(low, f);
            direct_expr_queries(high, f);
        }
        Expr::InList { expr, list, .. } => {
            direct_expr_queries(expr, f);
            list.iter_mut().for_each(|e| direct_expr_queries(e, f));
        }
        Expr::InSubquery { expr, subquery, .. } => {
            direct_expr_queries(expr, f);
            f(subquery);
        }
        Expr::InFunction { expr, function, .. } => {
            direct_expr_queries(expr, f);
            function_child_queries(function, f);
        }
        Expr::Function(call) => {
            if let FunctionArgs::List { args, .. } = &mut call.args {
                args.iter_mut().for_each(|e| direct_expr_queries(e, f));
            }
        }
        Expr::Case {
            operand,
            branches,
            else_result,
        } => {
            if let Some(o) = operand {
                direct_expr_queries(o, f);
            }
            for (c, r) in branches {
                direct_expr_queries(c, f);
                direct_expr_queries(r, f);
            }
            if let Some(e) = else_result {
                direct_expr_queries(e, f);
            }
        }
        Expr::Subquery(q) | Expr::Exists { subquery: q, .. } => f(q),
        Expr::Llm(func) => function_child_queries(func, f),
    }
}

/// Applies `f` to every table factor in the tree.
pub fn for_each_table_factor_mut(q: &mut Query, f: &mut dyn FnMut(&mut TableFactor)) {
    for_each_query_mut(q, &mut |query| {
        let mut stack: Vec<&mut SetExpr> = vec![&mut query.body];
        while let Some(s) = stack.pop() {
            match s {
                SetExpr::Select(sel) => {
                    for t in &mut sel.from {
                        f(&mut t.relation);
                        for j in &mut t.joins {
                            f(&mut j.relation);
                        }
                    }
                }
                SetExpr::Values(_) => {}
                SetExpr::SetOperation { left, right, .. } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
    });
}

/// Applies `f` to every SELECT block in the tree.
pub fn for_each_select_mut(q: &mut Query, f: &mut dyn FnMut(&mut Select)) {
    for_each_query_mut(q, &mut |query| {
        let mut stack: Vec<&mut SetExpr> = vec![&mut query.body];
        while let Some(s) = stack.pop() {
            match s {
                SetExpr::Select(sel) => f(sel),
                SetExpr::Values(_) => {}
                SetExpr::SetOperation { left, right, .. } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::parser::parse;

    #[test]
    fn functions_in_preorder() {
        let q = parse(
            "SELECT {{LLMQA('a {}', (SELECT x FROM w WHERE y = {{LLMQA('b')}}))}} FROM t \
             WHERE {{LLMMap('c', t.z)}} = 1",
        )
        .unwrap();
        let ids: Vec<_> = functions(&q).iter().map(|f| f.question.clone()).collect();
        assert_eq!(ids, ["a {}", "b", "c"]);
    }

    #[test]
    fn table_names_are_collected() {
        let q = parse("SELECT * FROM a JOIN b ON a.x = b.x WHERE a.y IN (SELECT y FROM c)").unwrap();
        assert_eq!(table_names(&q), ["a", "b", "c"]);
    }
}
