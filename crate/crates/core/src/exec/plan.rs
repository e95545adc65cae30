//! Rule-based planning: native work costs 0, language-model functions cost
//! infinity and are deferred until everything they depend on has run.

use std::fmt;

use serde::Serialize;

use super::scope::native_conjuncts;
use crate::sql::visit::table_names;
use crate::sql::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Cost {
    Zero,
    Infinite,
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Cost::Zero => "0",
            Cost::Infinite => "inf",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    With,
    From,
    Join,
    Where,
    GroupBy,
    Having,
    Select,
    OrderBy,
    Limit,
    Values,
    Argument,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum Action {
    /// Evaluate a function's argument or options subquery.
    Subquery,
    /// Pre-filter a map function's input values with native predicates.
    EagerFilter { node: NodeId, predicates: usize },
    MaterializeCte { name: String },
    Function { node: NodeId, kind: String },
    /// Run the fully rewritten query.
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanStep {
    pub index: usize,
    pub cost: Cost,
    pub clause: Clause,
    #[serde(flatten)]
    pub action: Action,
    pub depends_on: Vec<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ExecutionPlan {
    pub steps: Vec<PlanStep>,
}

impl ExecutionPlan {
    /// Function nodes in execution order.
    pub fn function_order(&self) -> Vec<NodeId> {
        self.steps
            .iter()
            .filter_map(|s| match s.action {
                Action::Function { node, .. } => Some(node),
                _ => None,
            })
            .collect()
    }
}

impl fmt::Display for ExecutionPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            let deps = if s.depends_on.is_empty() {
                String::new()
            } else {
                format!(
                    " after [{}]",
                    s.depends_on.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
                )
            };
            writeln!(f, "{:>3}  cost={:<3}  {:<9} {}{}", s.index, s.cost, format!("{:?}", s.clause), s.detail, deps)?;
        }
        Ok(())
    }
}

struct Planner {
    steps: Vec<PlanStep>,
    ctes: Vec<String>,
    materialized: Vec<String>,
}

impl Planner {
    fn push(&mut self, cost: Cost, clause: Clause, action: Action, depends_on: Vec<usize>, detail: String) -> usize {
        let index = self.steps.len();
        self.steps.push(PlanStep {
            index,
            cost,
            clause,
            action,
            depends_on,
            detail,
        });
        index
    }

    /// Returns the function steps planned inside `q`.
    fn query(&mut self, q: &Query) -> Vec<usize> {
        let mut out = Vec::new();
        for cte in &q.with {
            out.extend(self.query(&cte.query));
        }
        out.extend(self.set_expr(&q.body));
        let owner = match &q.body {
            SetExpr::Select(s) => Some(s.as_ref()),
            _ => None,
        };
        for o in &q.order_by {
            out.extend(self.expr(&o.expr, Clause::OrderBy, owner));
        }
        for e in q.limit.iter().chain(q.offset.iter()) {
            out.extend(self.expr(e, Clause::Limit, owner));
        }
        out
    }

    fn set_expr(&mut self, s: &SetExpr) -> Vec<usize> {
        match s {
            SetExpr::Select(sel) => self.select(sel),
            SetExpr::Values(rows) => rows
                .iter()
                .flatten()
                .flat_map(|e| self.expr(e, Clause::Values, None))
                .collect(),
            SetExpr::SetOperation { left, right, .. } => {
                let mut out = self.set_expr(left);
                out.extend(self.set_expr(right));
                out
            }
        }
    }

    fn select(&mut self, s: &Select) -> Vec<usize> {
        let mut out = Vec::new();
        for t in &s.from {
            out.extend(self.factor(&t.relation, Clause::From, s));
            for j in &t.joins {
                out.extend(self.factor(&j.relation, Clause::Join, s));
                if let JoinConstraint::On(e) = &j.constraint {
                    out.extend(self.expr(e, Clause::Join, Some(s)));
                }
            }
        }
        if let Some(w) = &s.selection {
            out.extend(self.expr(w, Clause::Where, Some(s)));
        }
        for g in &s.group_by {
            out.extend(self.expr(g, Clause::GroupBy, Some(s)));
        }
        if let Some(h) = &s.having {
            out.extend(self.expr(h, Clause::Having, Some(s)));
        }
        for item in &s.projection {
            if let SelectItem::Expr { expr, .. } = item {
                out.extend(self.expr(expr, Clause::Select, Some(s)));
            }
        }
        out
    }

    fn factor(&mut self, f: &TableFactor, clause: Clause, owner: &Select) -> Vec<usize> {
        match f {
            TableFactor::Table { .. } => Vec::new(),
            TableFactor::Derived { subquery, .. } => self.query(subquery),
            TableFactor::LlmValues { function, .. } => vec![self.function(function, clause, Some(owner))],
        }
    }

    fn expr(&mut self, e: &Expr, clause: Clause, owner: Option<&Select>) -> Vec<usize> {
        let mut out = Vec::new();
        match e {
            Expr::Literal(_) | Expr::Column(_) => {}
            Expr::Llm(f) => out.push(self.function(f, clause, owner)),
            Expr::InFunction { expr, function, .. } => {
                out.extend(self.expr(expr, clause, owner));
                out.push(self.function(function, clause, owner));
            }
            Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::Cast { expr, .. } => {
                out.extend(self.expr(expr, clause, owner))
            }
            Expr::Binary { left, right, .. } => {
                out.extend(self.expr(left, clause, owner));
                out.extend(self.expr(right, clause, owner));
            }
            Expr::Like { expr, pattern, .. } => {
                out.extend(self.expr(expr, clause, owner));
                out.extend(self.expr(pattern, clause, owner));
            }
            Expr::Between { expr, low, high, .. } => {
                for x in [expr, low, high] {
                    out.extend(self.expr(x, clause, owner));
                }
            }
            Expr::InList { expr, list, .. } => {
                out.extend(self.expr(expr, clause, owner));
                for x in list {
                    out.extend(self.expr(x, clause, owner));
                }
            }
            Expr::InSubquery { expr, subquery, .. } => {
                out.extend(self.expr(expr, clause, owner));
                out.extend(self.query(subquery));
            }
            Expr::Function(call) => {
                if let FunctionArgs::List { args, .. } = &call.args {
                    for x in args {
                        out.extend(self.expr(x, clause, owner));
                    }
                }
            }
            Expr::Case {
                operand,
                branches,
                else_result,
            } => {
                for x in operand.iter() {
                    out.extend(self.expr(x, clause, owner));
                }
                for (c, r) in branches {
                    out.extend(self.expr(c, clause, owner));
                    out.extend(self.expr(r, clause, owner));
                }
                for x in else_result.iter() {
                    out.extend(self.expr(x, clause, owner));
                }
            }
            Expr::Subquery(q) | Expr::Exists { subquery: q, .. } => out.extend(self.query(q)),
        }
        out
    }

    fn materialize(&mut self, tables: &[String], clause: Clause, deps: &mut Vec<usize>) {
        for t in tables {
            let Some(name) = self.ctes.iter().find(|c| c.eq_ignore_ascii_case(t)).cloned() else {
                continue;
            };
            if self.materialized.iter().any(|m| m.eq_ignore_ascii_case(&name)) {
                continue;
            }
            self.materialized.push(name.clone());
            let detail = format!("materialize CTE {name}");
            deps.push(self.push(Cost::Zero, clause, Action::MaterializeCte { name }, Vec::new(), detail));
        }
    }

    fn function(&mut self, f: &LlmFunction, clause: Clause, owner: Option<&Select>) -> usize {
        let mut deps = Vec::new();
        let mut tables: Vec<String> = Vec::new();
        for a in f.args.iter().chain(f.options.iter()) {
            match a {
                FunctionArg::Subquery(q) => {
                    let inner = self.query(q);
                    tables.extend(table_names(q));
                    self.materialize(&tables, Clause::Argument, &mut deps);
                    let detail = format!("evaluate argument of node {}: {}", f.id, render_query(q));
                    deps.push(self.push(Cost::Zero, Clause::Argument, Action::Subquery, inner, detail));
                }
                FunctionArg::Column(c) => tables.extend(c.table.iter().map(|t| t.value.clone())),
                FunctionArg::Literal(_) => {}
            }
        }
        if let Some(s) = owner {
            for t in &s.from {
                for r in std::iter::once(&t.relation).chain(t.joins.iter().map(|j| &j.relation)) {
                    if let TableFactor::Table { name, .. } = r {
                        tables.push(name.value.clone());
                    }
                }
            }
        }
        self.materialize(&tables, clause, &mut deps);
        if f.kind.is_map() {
            let predicates = owner.map_or(0, |s| native_conjuncts(s).len());
            let joins = owner.map_or(0, |s| s.from.iter().map(|t| t.joins.len()).sum::<usize>());
            if predicates > 0 || joins > 0 {
                let detail = format!(
                    "eager filter for node {}: {predicates} native predicate(s), {joins} join(s)",
                    f.id
                );
                deps.push(self.push(Cost::Zero, clause, Action::EagerFilter { node: f.id, predicates }, Vec::new(), detail));
            }
        }
        let detail = format!("node {}: {}", f.id, render_function(f));
        self.push(
            Cost::Infinite,
            clause,
            Action::Function {
                node: f.id,
                kind: f.kind.name().to_string(),
            },
            deps,
            detail,
        )
    }
}

pub fn plan(q: &Query) -> ExecutionPlan {
    let mut p = Planner {
        steps: Vec::new(),
        ctes: super::scope::cte_names(q),
        materialized: Vec::new(),
    };
    let functions = p.query(q);
    let detail = if functions.is_empty() {
        format!("execute {}", render_query(q))
    } else {
        "execute the rewritten query".to_string()
    };
    p.push(Cost::Zero, Clause::Final, Action::Final, functions, detail);
    ExecutionPlan { steps: p.steps }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(p: &ExecutionPlan) -> Vec<String> {
        p.steps
            .iter()
            .map(|s| match &s.action {
                Action::Subquery => "sub".into(),
                Action::EagerFilter { .. } => "filter".into(),
                Action::MaterializeCte { name } => format!("cte:{name}"),
                Action::Function { node, .. } => format!("f{node}"),
                Action::Final => "final".into(),
            })
            .collect()
    }

    #[test]
    fn pure_sql_is_one_native_step() {
        let p = plan(&parse("SELECT 1").unwrap());
        assert_eq!(kinds(&p), vec!["final"]);
        assert_eq!(p.steps[0].cost, Cost::Zero);
    }

    #[test]
    fn native_filter_precedes_map() {
        let p = plan(&parse("SELECT * FROM w WHERE w.x = 1 AND {{LLMMap('q', w.team)}} = TRUE").unwrap());
        assert_eq!(kinds(&p), vec!["filter", "f0", "final"]);
        assert_eq!(p.steps[1].depends_on, vec![0]);
    }

    #[test]
    fn nested_functions_come_first() {
        let p = plan(
            &parse(
                "SELECT {{LLMQA('In which city is {} located?', (SELECT s FROM w WHERE player = {{LLMQA('who?')}}))}}",
            )
            .unwrap(),
        );
        assert_eq!(kinds(&p), vec!["f1", "sub", "f0", "final"]);
        assert_eq!(p.function_order(), vec![1, 0]);
    }

    #[test]
    fn clause_order_and_ctes() {
        let p = plan(
            &parse(
                "WITH t AS (SELECT g FROM w WHERE rank = 1) SELECT {{LLMQA('a')}} FROM t \
                 WHERE {{LLMQA('b')}} ORDER BY {{LLMSearchMap('c {}', t.g)}}",
            )
            .unwrap(),
        );
        assert_eq!(kinds(&p), vec!["cte:t", "f1", "f0", "f2", "final"]);
    }
}
