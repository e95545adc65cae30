//! Where a function node sits: its owning SELECT, the relations visible to
//! it, and the CTEs it depends on.

use crate::sql::visit::{expr_has_functions, for_each_query_mut, for_each_select_mut, for_each_table_factor_mut};
use crate::sql::*;

/// Function ids appearing in `e` itself, not inside nested queries.
pub fn direct_ids(e: &Expr, out: &mut Vec<NodeId>) {
    match e {
        Expr::Literal(_) | Expr::Column(_) => {}
        Expr::Llm(f) => out.push(f.id),
        Expr::InFunction { expr, function, .. } => {
            direct_ids(expr, out);
            out.push(function.id);
        }
        Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::Cast { expr, .. } => direct_ids(expr, out),
        Expr::InSubquery { expr, .. } => direct_ids(expr, out),
        Expr::Binary { left, right, .. } => {
            direct_ids(left, out);
            direct_ids(right, out);
        }
        Expr::Like { expr, pattern, .. } => {
            direct_ids(expr, out);
            direct_ids(pattern, out);
        }
        Expr::Between { expr, low, high, .. } => {
            direct_ids(expr, out);
            direct_ids(low, out);
            direct_ids(high, out);
        }
        Expr::InList { expr, list, .. } => {
            direct_ids(expr, out);
            list.iter().for_each(|e| direct_ids(e, out));
        }
        Expr::Function(call) => {
            if let FunctionArgs::List { args, .. } = &call.args {
                args.iter().for_each(|e| direct_ids(e, out));
            }
        }
        Expr::Case {
            operand,
            branches,
            else_result,
        } => {
            operand.iter().for_each(|e| direct_ids(e, out));
            for (c, r) in branches {
                direct_ids(c, out);
                direct_ids(r, out);
            }
            else_result.iter().for_each(|e| direct_ids(e, out));
        }
        Expr::Subquery(_) | Expr::Exists { .. } => {}
    }
}

fn contains(e: &Expr, id: NodeId) -> bool {
    let mut ids = Vec::new();
    direct_ids(e, &mut ids);
    ids.contains(&id)
}

/// Whether `id` sits directly in one of the clauses of `s`.
pub fn select_owns(s: &Select, id: NodeId) -> bool {
    let in_items = s.projection.iter().any(|item| match item {
        SelectItem::Expr { expr, .. } => contains(expr, id),
        _ => false,
    });
    let in_from = s.from.iter().any(|t| {
        std::iter::once(&t.relation)
            .chain(t.joins.iter().map(|j| &j.relation))
            .any(|f| matches!(f, TableFactor::LlmValues { function, .. } if function.id == id))
            || t.joins
                .iter()
                .any(|j| matches!(&j.constraint, JoinConstraint::On(e) if contains(e, id)))
    });
    in_items
        || in_from
        || s.selection.as_ref().is_some_and(|e| contains(e, id))
        || s.group_by.iter().any(|e| contains(e, id))
        || s.having.as_ref().is_some_and(|e| contains(e, id))
}

/// Whether `id` sits directly in the ORDER BY, LIMIT or OFFSET of `q`.
pub fn query_owns(q: &Query, id: NodeId) -> bool {
    q.order_by.iter().any(|o| contains(&o.expr, id))
        || q.limit.iter().chain(q.offset.iter()).any(|e| contains(e, id))
}

/// Applies `f` to the SELECT whose scope function `id` evaluates in. For
/// ORDER BY / LIMIT positions that is the query's own SELECT body.
/// Returns whether an owner was found.
pub fn with_owner_mut(q: &mut Query, id: NodeId, f: &mut dyn FnMut(&mut Select)) -> bool {
    let mut found = false;
    for_each_query_mut(q, &mut |query| {
        if found {
            return;
        }
        if query_owns(query, id) {
            if let SetExpr::Select(sel) = &mut query.body {
                f(sel);
                found = true;
            }
        }
    });
    if !found {
        for_each_select_mut(q, &mut |sel| {
            if !found && select_owns(sel, id) {
                f(sel);
                found = true;
            }
        });
    }
    found
}

pub fn owner_select(q: &Query, id: NodeId) -> Option<Select> {
    let mut q = q.clone();
    let mut out = None;
    with_owner_mut(&mut q, id, &mut |s| out = Some(s.clone()));
    out
}

/// Top-level AND operands.
pub fn conjuncts(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::Binary {
            left,
            op: BinaryOp::And,
            right,
        } => {
            let mut out = conjuncts(left);
            out.extend(conjuncts(right));
            out
        }
        other => vec![other],
    }
}

/// Conjuncts of the WHERE clause that contain no function nodes.
pub fn native_conjuncts(s: &Select) -> Vec<Expr> {
    s.selection
        .as_ref()
        .map(|w| {
            conjuncts(w)
                .into_iter()
                .filter(|c| !expr_has_functions(c))
                .cloned()
                .collect()
        })
        .unwrap_or_default()
}

pub fn and_all(exprs: Vec<Expr>) -> Option<Expr> {
    exprs
        .into_iter()
        .reduce(|a, b| Expr::binary(a, BinaryOp::And, b))
}

/// The relation visible under `name` in the FROM clause of `s`.
pub fn visible_factor<'a>(s: &'a Select, name: &str) -> Option<&'a TableFactor> {
    s.from
        .iter()
        .flat_map(|t| std::iter::once(&t.relation).chain(t.joins.iter().map(|j| &j.relation)))
        .find(|f| f.visible_name().is_some_and(|n| n.matches(name)))
}

/// Names of every CTE defined anywhere in `q`.
pub fn cte_names(q: &Query) -> Vec<String> {
    let mut q = q.clone();
    let mut out = Vec::new();
    for_each_query_mut(&mut q, &mut |query| {
        out.extend(query.with.iter().map(|c| c.name.value.clone()));
    });
    out
}

/// The CTE named `name` together with the CTEs defined before it in the
/// same WITH list.
pub fn find_cte(q: &Query, name: &str) -> Option<(Vec<Cte>, Cte)> {
    let mut q = q.clone();
    let mut out = None;
    for_each_query_mut(&mut q, &mut |query| {
        if out.is_some() {
            return;
        }
        if let Some(i) = query.with.iter().position(|c| c.name.matches(name)) {
            out = Some((query.with[..i].to_vec(), query.with[i].clone()));
        }
    });
    out
}

/// Drops the definition of CTE `name` and points every reference at
/// `table`, keeping the old name as the alias so qualified columns still
/// resolve.
pub fn replace_cte(q: &mut Query, name: &str, table: &str) {
    for_each_query_mut(q, &mut |query| query.with.retain(|c| !c.name.matches(name)));
    for_each_table_factor_mut(q, &mut |f| {
        if let TableFactor::Table { name: n, alias } = f {
            if n.matches(name) {
                if alias.is_none() {
                    *alias = Some(n.clone());
                }
                *n = Ident::new(table);
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::{parse, render_query};

    #[test]
    fn owner_is_innermost_select() {
        let q = parse(
            "SELECT {{LLMQA('a {}', (SELECT x FROM w WHERE y = {{LLMQA('b')}}))}} FROM t ORDER BY {{LLMQA('c')}}",
        )
        .unwrap();
        let ids: Vec<NodeId> = crate::sql::visit::functions(&q).iter().map(|f| f.id).collect();
        let from_of = |id| {
            owner_select(&q, id)
                .and_then(|s| s.from.first().and_then(|t| t.relation.visible_name().map(|n| n.value.clone())))
        };
        assert_eq!(from_of(ids[0]).as_deref(), Some("t"));
        assert_eq!(from_of(ids[1]).as_deref(), Some("w"));
        assert_eq!(from_of(ids[2]).as_deref(), Some("t"));
    }

    #[test]
    fn cte_replacement_keeps_alias() {
        let mut q = parse("WITH t AS (SELECT g FROM w) SELECT t.g FROM t").unwrap();
        assert_eq!(cte_names(&q), vec!["t"]);
        replace_cte(&mut q, "t", "__bsql_0_cte_t");
        assert_eq!(render_query(&q), "SELECT t.g FROM __bsql_0_cte_t AS t");
    }

    #[test]
    fn native_conjuncts_skip_functions() {
        let q = parse("SELECT * FROM p WHERE p.name LIKE 'Adam%' AND p.w > {{LLMQA('x')}} AND p.h < 3").unwrap();
        let SetExpr::Select(s) = &q.body else { panic!() };
        assert_eq!(native_conjuncts(s).len(), 2);
    }
}
