//! Expression-context type inference for function nodes.

use super::{InferredType, TypeConfig};
use crate::error::{Error, Result};
use crate::sql::render::render_expr;
use crate::sql::*;
use crate::value::SqlValue;

/// The syntactic context a function node sits in.
#[derive(Debug, Clone, PartialEq)]
pub enum ContextRule {
    /// `f() = TRUE`
    BoolComparison,
    /// `f() > 40`
    IntComparison,
    /// `f() > 4.5`
    FloatComparison,
    /// `f() BETWEEN 60.1 AND 80.3`
    FloatBetween,
    /// `f() BETWEEN 1 AND 3`
    IntBetween,
    /// `city = f()`
    ColumnEquality(ColumnRef),
    /// `f() > age`: typed by the values stored in the column.
    ColumnOrdering(ColumnRef),
    /// `team IN f()`
    InColumn(ColumnRef),
    /// `expr IN f()` over something other than a column.
    InExpr,
    /// `ORDER BY f()`
    OrderBy,
    /// `SUM(f())`
    Aggregate,
    /// `SELECT * FROM VALUES f()`
    Values,
    /// A bare boolean condition: WHERE, HAVING, ON, or an AND/OR/NOT operand.
    Predicate,
    /// `LIMIT f()` / `OFFSET f()`
    LimitOffset,
    Unconstrained,
}

impl ContextRule {
    pub fn describe(&self) -> String {
        match self {
            ContextRule::BoolComparison => "comparison with a boolean".into(),
            ContextRule::IntComparison => "comparison with an integer".into(),
            ContextRule::FloatComparison => "comparison with a float".into(),
            ContextRule::FloatBetween => "BETWEEN float bounds".into(),
            ContextRule::IntBetween => "BETWEEN integer bounds".into(),
            ContextRule::ColumnEquality(c) => {
                format!("equality with {}", render_expr(&Expr::Column(c.clone())))
            }
            ContextRule::ColumnOrdering(c) => {
                format!("ordering against {}", render_expr(&Expr::Column(c.clone())))
            }
            ContextRule::InColumn(c) => {
                format!("IN over {}", render_expr(&Expr::Column(c.clone())))
            }
            ContextRule::InExpr => "IN over an expression".into(),
            ContextRule::OrderBy => "ORDER BY".into(),
            ContextRule::Aggregate => "numeric aggregate argument".into(),
            ContextRule::Values => "VALUES".into(),
            ContextRule::Predicate => "predicate".into(),
            ContextRule::LimitOffset => "LIMIT/OFFSET".into(),
            ContextRule::Unconstrained => "unconstrained".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub rule: ContextRule,
    pub ty: InferredType,
    /// Original database spellings of each Literal value, keyed by the
    /// lowercased form.
    pub originals: Vec<(String, SqlValue)>,
    /// Set when a rule was skipped because it only applies to QA functions.
    pub note: Option<String>,
}

impl Inference {
    pub fn original(&self, lowered: &str) -> Option<&SqlValue> {
        self.originals
            .iter()
            .find(|(k, _)| k == lowered)
            .map(|(_, v)| v)
    }

    /// The type with Literal members in their stored spelling.
    pub fn signature(&self) -> String {
        fn restore(t: &InferredType, inf: &Inference) -> InferredType {
            match t {
                InferredType::Literal(values) => InferredType::Literal(
                    values
                        .iter()
                        .map(|v| inf.original(v).map_or_else(|| v.clone(), |o| o.to_string()))
                        .collect(),
                ),
                InferredType::ListOf { inner, quantifier } => InferredType::list_of(restore(inner, inf), *quantifier),
                other => other.clone(),
            }
        }
        restore(&self.ty, self).to_string()
    }
}

/// Infers the type of function `id` in `q`.
///
/// `fetch` returns the values of a column as seen from the function's
/// enclosing SELECT; `options` are the already-evaluated candidate values
/// when the node carries an `options=` argument.
pub fn infer_return_type(
    q: &Query,
    id: NodeId,
    fetch: &mut dyn FnMut(&ColumnRef) -> Result<Vec<SqlValue>>,
    options: Option<&[SqlValue]>,
    cfg: &TypeConfig,
) -> Result<Inference> {
    let function = functions(q)
        .into_iter()
        .find(|f| f.id == id)
        .cloned()
        .ok_or_else(|| Error::Internal(format!("function node {id} not found")))?;
    let rule = locate_context(q, id).unwrap_or(ContextRule::Unconstrained);
    resolve(rule, &function, fetch, options, cfg)
}

fn functions(q: &Query) -> Vec<&LlmFunction> {
    crate::sql::visit::functions(q)
}

pub fn resolve(
    rule: ContextRule,
    function: &LlmFunction,
    fetch: &mut dyn FnMut(&ColumnRef) -> Result<Vec<SqlValue>>,
    options: Option<&[SqlValue]>,
    cfg: &TypeConfig,
) -> Result<Inference> {
    let qa = function.kind == FunctionKind::Qa;
    let mut originals = Vec::new();
    let mut note = None;
    let mut literal_of = |values: Vec<SqlValue>, origin: &str| -> Result<InferredType> {
        let (lowered, orig) = literal_set(values, origin, cfg.literal_cap)?;
        originals = orig;
        Ok(InferredType::Literal(lowered))
    };
    let qa_only = |note: &mut Option<String>, rule: &ContextRule| {
        *note = Some(format!(
            "{} in {} context: rule applies to LLMQA only, using Any",
            function.kind,
            rule.describe()
        ));
        InferredType::Any
    };
    let mut ty = match &rule {
        ContextRule::BoolComparison | ContextRule::Predicate => InferredType::Bool,
        ContextRule::IntComparison | ContextRule::IntBetween | ContextRule::LimitOffset => {
            InferredType::Int
        }
        ContextRule::FloatComparison | ContextRule::FloatBetween => InferredType::Float,
        ContextRule::OrderBy | ContextRule::Aggregate => InferredType::NumericUnion,
        ContextRule::ColumnOrdering(col) => numeric_type_of(&fetch(col)?),
        ContextRule::ColumnEquality(col) if qa => {
            literal_of(fetch(col)?, &render_expr(&Expr::Column(col.clone())))?
        }
        ContextRule::InColumn(col) if qa => InferredType::list_of(
            literal_of(fetch(col)?, &render_expr(&Expr::Column(col.clone())))?,
            function.quantifier,
        ),
        ContextRule::InExpr if qa => InferredType::list_of(InferredType::Any, function.quantifier),
        ContextRule::Values if qa => InferredType::list_of(InferredType::Any, function.quantifier),
        ContextRule::ColumnEquality(_) | ContextRule::InColumn(_) => qa_only(&mut note, &rule),
        ContextRule::InExpr | ContextRule::Values => {
            return Err(Error::InvalidFunction(format!(
                "{} cannot produce a list; only LLMQA may appear in {} position",
                function.kind,
                rule.describe()
            )))
        }
        ContextRule::Unconstrained => InferredType::Any,
    };
    if let Some(values) = options {
        let literal = literal_of(values.to_vec(), "options")?;
        ty = match ty {
            InferredType::ListOf { quantifier, .. } => InferredType::list_of(literal, quantifier),
            _ => literal,
        };
    }
    if function.quantifier.is_some() && !ty.is_list() {
        return Err(Error::InvalidFunction(format!(
            "quantifier on {} in scalar {} context",
            function.kind,
            rule.describe()
        )));
    }
    Ok(Inference {
        rule,
        ty,
        originals,
        note,
    })
}

/// Int when every stored value is an integer, Float when all are numeric,
/// Any otherwise (text columns compare lexically).
fn numeric_type_of(values: &[SqlValue]) -> InferredType {
    let present: Vec<&SqlValue> = values.iter().filter(|v| !v.is_null()).collect();
    if present.is_empty() {
        InferredType::Any
    } else if present.iter().all(|v| matches!(v, SqlValue::Integer(_))) {
        InferredType::Int
    } else if present.iter().all(|v| matches!(v, SqlValue::Integer(_) | SqlValue::Real(_))) {
        InferredType::Float
    } else {
        InferredType::Any
    }
}

/// Lowercases and de-duplicates values in first-seen order, dropping NULLs.
fn literal_set(
    values: Vec<SqlValue>,
    origin: &str,
    cap: usize,
) -> Result<(Vec<String>, Vec<(String, SqlValue)>)> {
    let mut lowered: Vec<String> = Vec::new();
    let mut originals = Vec::new();
    for v in values {
        if v.is_null() {
            continue;
        }
        let key = v.to_string().to_lowercase();
        if !lowered.contains(&key) {
            lowered.push(key.clone());
            originals.push((key, v));
            if lowered.len() > cap {
                return Err(Error::LiteralSetTooLarge {
                    column: origin.to_string(),
                    cap,
                });
            }
        }
    }
    if lowered.is_empty() {
        return Err(Error::EmptyLiteralSet(origin.to_string()));
    }
    Ok((lowered, originals))
}

/// Finds the syntactic context of function `id`. `None` if absent.
pub fn locate_context(q: &Query, id: NodeId) -> Option<ContextRule> {
    in_query(q, id)
}

#[derive(Clone, Copy, PartialEq)]
enum Pos {
    Predicate,
    OrderBy,
    Limit,
    Other,
}

fn is_target(e: &Expr, id: NodeId) -> bool {
    matches!(e, Expr::Llm(f) if f.id == id)
}

fn at_position(pos: Pos) -> ContextRule {
    match pos {
        Pos::Predicate => ContextRule::Predicate,
        Pos::OrderBy => ContextRule::OrderBy,
        Pos::Limit => ContextRule::LimitOffset,
        Pos::Other => ContextRule::Unconstrained,
    }
}

enum LiteralClass {
    Bool,
    Int,
    Float,
    Other,
}

fn literal_class(e: &Expr) -> LiteralClass {
    match e {
        Expr::Literal(Literal::Bool(_)) => LiteralClass::Bool,
        Expr::Literal(Literal::Integer(_)) => LiteralClass::Int,
        Expr::Literal(Literal::Real(_)) => LiteralClass::Float,
        Expr::Unary {
            op: UnaryOp::Minus | UnaryOp::Plus,
            expr,
        } => match literal_class(expr) {
            LiteralClass::Bool => LiteralClass::Other,
            other => other,
        },
        _ => LiteralClass::Other,
    }
}

fn comparison_rule(op: BinaryOp, other: &Expr) -> ContextRule {
    if matches!(op, BinaryOp::And | BinaryOp::Or) {
        return ContextRule::Predicate;
    }
    if !op.is_comparison() {
        return ContextRule::Unconstrained;
    }
    match literal_class(other) {
        LiteralClass::Bool => ContextRule::BoolComparison,
        LiteralClass::Int => ContextRule::IntComparison,
        LiteralClass::Float => ContextRule::FloatComparison,
        LiteralClass::Other => match other {
            Expr::Column(c) if op.is_equality() => ContextRule::ColumnEquality(c.clone()),
            Expr::Column(c) => ContextRule::ColumnOrdering(c.clone()),
            _ => ContextRule::Unconstrained,
        },
    }
}

fn in_query(q: &Query, id: NodeId) -> Option<ContextRule> {
    for cte in &q.with {
        if let Some(r) = in_query(&cte.query, id) {
            return Some(r);
        }
    }
    if let Some(r) = in_set_expr(&q.body, id) {
        return Some(r);
    }
    for o in &q.order_by {
        if let Some(r) = in_expr(&o.expr, id, Pos::OrderBy) {
            return Some(r);
        }
    }
    for e in q.limit.iter().chain(q.offset.iter()) {
        if let Some(r) = in_expr(e, id, Pos::Limit) {
            return Some(r);
        }
    }
    None
}

fn in_set_expr(s: &SetExpr, id: NodeId) -> Option<ContextRule> {
    match s {
        SetExpr::Select(sel) => in_select(sel, id),
        SetExpr::Values(rows) => rows
            .iter()
            .flatten()
            .find_map(|e| in_expr(e, id, Pos::Other)),
        SetExpr::SetOperation { left, right, .. } => {
            in_set_expr(left, id).or_else(|| in_set_expr(right, id))
        }
    }
}

fn in_select(s: &Select, id: NodeId) -> Option<ContextRule> {
    for t in &s.from {
        for factor in std::iter::once(&t.relation).chain(t.joins.iter().map(|j| &j.relation)) {
            if let Some(r) = in_table_factor(factor, id) {
                return Some(r);
            }
        }
        for j in &t.joins {
            if let JoinConstraint::On(e) = &j.constraint {
                if let Some(r) = in_expr(e, id, Pos::Predicate) {
                    return Some(r);
                }
            }
        }
    }
    if let Some(r) = s.selection.as_ref().and_then(|w| in_expr(w, id, Pos::Predicate)) {
        return Some(r);
    }
    if let Some(r) = s.group_by.iter().find_map(|g| in_expr(g, id, Pos::Other)) {
        return Some(r);
    }
    if let Some(r) = s.having.as_ref().and_then(|h| in_expr(h, id, Pos::Predicate)) {
        return Some(r);
    }
    s.projection.iter().find_map(|item| match item {
        SelectItem::Expr { expr, .. } => in_expr(expr, id, Pos::Other),
        _ => None,
    })
}

fn in_table_factor(t: &TableFactor, id: NodeId) -> Option<ContextRule> {
    match t {
        TableFactor::Table { .. } => None,
        TableFactor::Derived { subquery, .. } => in_query(subquery, id),
        TableFactor::LlmValues { function, .. } => {
            if function.id == id {
                Some(ContextRule::Values)
            } else {
                in_function_args(function, id)
            }
        }
    }
}

fn in_function_args(f: &LlmFunction, id: NodeId) -> Option<ContextRule> {
    f.args
        .iter()
        .chain(f.options.iter())
        .find_map(|a| match a {
            FunctionArg::Subquery(q) => in_query(q, id),
            _ => None,
        })
}

fn in_expr(e: &Expr, id: NodeId, pos: Pos) -> Option<ContextRule> {
    if is_target(e, id) {
        return Some(at_position(pos));
    }
    match e {
        Expr::Literal(_) | Expr::Column(_) => None,
        Expr::Binary { left, op, right } => {
            if is_target(left, id) {
                return Some(comparison_rule(*op, right));
            }
            if is_target(right, id) {
                return Some(comparison_rule(*op, left));
            }
            let child = if matches!(op, BinaryOp::And | BinaryOp::Or) {
                Pos::Predicate
            } else {
                Pos::Other
            };
            in_expr(left, id, child).or_else(|| in_expr(right, id, child))
        }
        Expr::Unary { op, expr } => {
            let child = if *op == UnaryOp::Not {
                Pos::Predicate
            } else {
                Pos::Other
            };
            in_expr(expr, id, child)
        }
        Expr::Between {
            expr, low, high, ..
        } => {
            if is_target(expr, id) {
                let rule = match (literal_class(low), literal_class(high)) {
                    (LiteralClass::Int, LiteralClass::Int) => ContextRule::IntBetween,
                    (
                        LiteralClass::Int | LiteralClass::Float,
                        LiteralClass::Int | LiteralClass::Float,
                    ) => ContextRule::FloatBetween,
                    _ => ContextRule::Unconstrained,
                };
                return Some(rule);
            }
            [expr, low, high]
                .into_iter()
                .find_map(|x| in_expr(x, id, Pos::Other))
        }
        Expr::InFunction {
            expr, function, ..
        } => {
            if function.id == id {
                return Some(match expr.as_ref() {
                    Expr::Column(c) => ContextRule::InColumn(c.clone()),
                    _ => ContextRule::InExpr,
                });
            }
            in_expr(expr, id, Pos::Other).or_else(|| in_function_args(function, id))
        }
        Expr::Function(call) => {
            let FunctionArgs::List { args, .. } = &call.args else {
                return None;
            };
            let numeric = ["sum", "avg", "total"]
                .iter()
                .any(|n| call.name.matches(n));
            if numeric && args.iter().any(|a| is_target(a, id)) {
                return Some(ContextRule::Aggregate);
            }
            args.iter().find_map(|a| in_expr(a, id, Pos::Other))
        }
        Expr::Like { expr, pattern, .. } => {
            in_expr(expr, id, Pos::Other).or_else(|| in_expr(pattern, id, Pos::Other))
        }
        Expr::InList { expr, list, .. } => in_expr(expr, id, Pos::Other)
            .or_else(|| list.iter().find_map(|x| in_expr(x, id, Pos::Other))),
        Expr::InSubquery { expr, subquery, .. } => {
            in_expr(expr, id, Pos::Other).or_else(|| in_query(subquery, id))
        }
        Expr::IsNull { expr, .. } | Expr::Cast { expr, .. } => in_expr(expr, id, Pos::Other),
        Expr::Case {
            operand,
            branches,
            else_result,
        } => {
            let cond_pos = if operand.is_none() {
                Pos::Predicate
            } else {
                Pos::Other
            };
            operand
                .as_ref()
                .and_then(|o| in_expr(o, id, Pos::Other))
                .or_else(|| {
                    branches.iter().find_map(|(c, r)| {
                        in_expr(c, id, cond_pos).or_else(|| in_expr(r, id, Pos::Other))
                    })
                })
                .or_else(|| else_result.as_ref().and_then(|x| in_expr(x, id, Pos::Other)))
        }
        Expr::Subquery(q) | Expr::Exists { subquery: q, .. } => in_query(q, id),
        Expr::Llm(f) => in_function_args(f, id),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule_of(sql: &str) -> ContextRule {
        let q = parse(sql).unwrap();
        let id = crate::sql::visit::functions(&q)[0].id;
        locate_context(&q, id).unwrap()
    }

    #[test]
    fn table_contexts() {
        assert_eq!(rule_of("SELECT * FROM t WHERE {{LLMQA('q')}} = TRUE"), ContextRule::BoolComparison);
        assert_eq!(rule_of("SELECT * FROM t WHERE {{LLMQA('q')}} > 40"), ContextRule::IntComparison);
        assert_eq!(
            rule_of("SELECT * FROM t WHERE {{LLMQA('q')}} BETWEEN 60.1 AND 80.3"),
            ContextRule::FloatBetween
        );
        assert_eq!(
            rule_of("SELECT * FROM t WHERE city = {{LLMQA('q')}}"),
            ContextRule::ColumnEquality(ColumnRef::new(None, "city"))
        );
        assert_eq!(
            rule_of("SELECT * FROM t WHERE team IN {{LLMQA('q')}}"),
            ContextRule::InColumn(ColumnRef::new(None, "team"))
        );
        assert_eq!(rule_of("SELECT * FROM t ORDER BY {{LLMQA('q')}}"), ContextRule::OrderBy);
        assert_eq!(rule_of("SELECT SUM({{LLMQA('q')}}) FROM t"), ContextRule::Aggregate);
        assert_eq!(rule_of("SELECT * FROM VALUES {{LLMQA('q')}}"), ContextRule::Values);
        assert_eq!(rule_of("SELECT {{LLMQA('q')}}"), ContextRule::Unconstrained);
    }

    #[test]
    fn extension_contexts() {
        assert_eq!(
            rule_of("SELECT * FROM t WHERE a = 1 AND {{LLMMap('q', t.x)}}"),
            ContextRule::Predicate
        );
        assert_eq!(rule_of("SELECT * FROM t LIMIT {{LLMQA('q')}}"), ContextRule::LimitOffset);
    }

    fn no_fetch(_: &ColumnRef) -> Result<Vec<SqlValue>> {
        Ok(vec!["Washington DC".into(), "San Jose".into(), SqlValue::Null, "washington dc".into()])
    }

    #[test]
    fn literal_sets_are_lowercased_and_distinct() {
        let q = parse("SELECT * FROM t WHERE city = {{LLMQA('q')}}").unwrap();
        let inf =
            infer_return_type(&q, 0, &mut no_fetch, None, &TypeConfig::default()).unwrap();
        assert_eq!(inf.ty.to_string(), "Literal['washington dc', 'san jose']");
        assert_eq!(inf.original("san jose"), Some(&SqlValue::from("San Jose")));
    }

    #[test]
    fn map_skips_qa_only_rules() {
        let q = parse("SELECT * FROM t WHERE city = {{LLMMap('q', t.x)}}").unwrap();
        let inf =
            infer_return_type(&q, 0, &mut no_fetch, None, &TypeConfig::default()).unwrap();
        assert_eq!(inf.ty, InferredType::Any);
        assert!(inf.note.is_some());
    }

    #[test]
    fn literal_cap_is_enforced() {
        let q = parse("SELECT * FROM t WHERE city = {{LLMQA('q')}}").unwrap();
        let cfg = TypeConfig {
            literal_cap: 1,
            ..TypeConfig::default()
        };
        let err = infer_return_type(&q, 0, &mut no_fetch, None, &cfg).unwrap_err();
        assert!(matches!(err, Error::LiteralSetTooLarge { cap: 1, .. }));
    }

    #[test]
    fn options_override_and_quantifier_needs_list() {
        let q = parse(
            "SELECT * FROM VALUES {{LLMQA('q', options=r.location, quantifier='{2}')}}",
        )
        .unwrap();
        let opts = ["Monaco".into(), "Spa".into()];
        let inf = infer_return_type(&q, 0, &mut no_fetch, Some(&opts), &TypeConfig::default())
            .unwrap();
        assert_eq!(inf.ty.to_string(), "List[Literal['monaco', 'spa']]");
        let q = parse("SELECT {{LLMQA('q', quantifier='{2}')}}").unwrap();
        assert!(infer_return_type(&q, 0, &mut no_fetch, None, &TypeConfig::default()).is_err());
    }
}
