//! Query execution: plan, run deferred functions one at a time, rewrite the
//! tree after each, and finally run the all-native query.

pub mod db;
pub mod plan;
pub mod report;
pub mod scope;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::functions::{
    fill_placeholders, llmmap, llmqa, FunctionConfig, GenerationStats, MapRequest, QaRequest, Searcher,
    DEFAULT_MAP_K, DEFAULT_QA_K,
};
use crate::model::ModelBackend;
use crate::retrieval::DocumentStore;
use crate::sql::visit::{for_each_expr_mut, for_each_query_mut, for_each_select_mut, for_each_table_factor_mut, functions, table_names};
use crate::sql::*;
use crate::types::{check_affinity, infer_return_type, locate_context, Coerced, ContextRule, Inference, InferredType, TypingPolicy};
use crate::value::{ResultSet, SqlValue};

pub use db::{Database, SqliteDatabase};
pub use plan::{plan, Action, Clause, Cost, ExecutionPlan, PlanStep};
pub use report::{ExecutionReport, FunctionReport, ReportedError, REPORT_SCHEMA_VERSION};

pub const VALUE_COLUMN: &str = "__value";
pub const OUTPUT_COLUMN: &str = "__output";
pub const DEFAULT_STORE: &str = "default";

#[derive(Debug, Clone)]
pub struct ExecOptions {
    pub functions: FunctionConfig,
    /// Record errors and continue with the failed function replaced by NULL.
    pub keep_going: bool,
    pub stores: BTreeMap<String, Arc<DocumentStore>>,
    pub k_qa: usize,
    pub k_search: usize,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            functions: FunctionConfig::default(),
            keep_going: false,
            stores: BTreeMap::new(),
            k_qa: DEFAULT_QA_K,
            k_search: DEFAULT_MAP_K,
        }
    }
}

impl ExecOptions {
    pub fn with_policy(policy: TypingPolicy) -> Self {
        let mut o = ExecOptions::default();
        o.functions.policy = policy;
        o
    }
}

#[derive(Debug)]
pub struct Execution {
    pub result: Result<ResultSet>,
    pub report: ExecutionReport,
}

/// Plan of a query without running anything.
pub fn explain(query_text: &str) -> Result<ExecutionPlan> {
    Ok(plan(&parse(query_text)?))
}

/// Parses, plans and runs `query_text`. The report is filled in even when
/// execution fails.
pub fn execute<B: ModelBackend + ?Sized>(
    query_text: &str,
    db: &dyn Database,
    backend: &B,
    opts: &ExecOptions,
) -> Execution {
    let start = Instant::now();
    let mut s = Session {
        db,
        id: String::new(),
        temp_tables: Vec::new(),
        ctes: BTreeMap::new(),
        report: ExecutionReport::new(opts.functions.policy),
        opts,
    };
    let result = s.run(query_text, backend);
    if let Err(e) = &result {
        s.report.errors.push(ReportedError::from_error(e));
    }
    s.close();
    s.report.wall_time = start.elapsed();
    Execution {
        result,
        report: s.report,
    }
}

struct Session<'a> {
    db: &'a dyn Database,
    id: String,
    temp_tables: Vec<String>,
    /// Materialized CTEs by lowercased name.
    ctes: BTreeMap<String, String>,
    report: ExecutionReport,
    opts: &'a ExecOptions,
}

fn value_expr(v: &SqlValue) -> Expr {
    Expr::Literal(match v {
        SqlValue::Null => Literal::Null,
        SqlValue::Integer(i) => Literal::Integer(*i),
        SqlValue::Real(r) => Literal::Real(*r),
        SqlValue::Text(s) => Literal::Text(s.clone()),
    })
}

fn literal_value(l: &Literal) -> SqlValue {
    match l {
        Literal::Null => SqlValue::Null,
        Literal::Bool(b) => SqlValue::Integer(*b as i64),
        Literal::Integer(i) => SqlValue::Integer(*i),
        Literal::Real(r) => SqlValue::Real(*r),
        Literal::Text(s) => SqlValue::Text(s.clone()),
    }
}

fn first_column(rs: ResultSet) -> Vec<SqlValue> {
    rs.rows.into_iter().filter_map(|r| r.into_iter().next()).collect()
}

/// Unresolved columns inside a function's own inputs are the model's
/// invention, not a mistake in the surrounding SQL.
fn inside_function(e: Error) -> Error {
    match e {
        Error::ColumnReference(m) => Error::HallucinatedColumn(m),
        other => other,
    }
}

fn values_query(rows: Vec<Vec<Expr>>) -> Query {
    if rows.is_empty() {
        return parse("SELECT NULL WHERE 0").expect("static query parses");
    }
    Query {
        with: Vec::new(),
        body: SetExpr::Values(rows),
        order_by: Vec::new(),
        limit: None,
        offset: None,
    }
}

/// The FROM clause of `owner` if it is free of function nodes, otherwise
/// only the relation visible as `table`.
fn scope_from(owner: &Select, table: Option<&str>) -> Vec<TableWithJoins> {
    let probe = Query::from_select(Select {
        from: owner.from.clone(),
        projection: vec![SelectItem::Wildcard],
        ..Select::default()
    });
    if !crate::sql::visit::query_has_functions(&probe) {
        return owner.from.clone();
    }
    table
        .and_then(|t| scope::visible_factor(owner, t))
        .filter(|f| matches!(f, TableFactor::Table { .. }))
        .map(|f| {
            vec![TableWithJoins {
                relation: f.clone(),
                joins: Vec::new(),
            }]
        })
        .unwrap_or_default()
}

fn replace_function(q: &mut Query, id: NodeId, replacement: Expr) {
    // A bare integer in ORDER BY / GROUP BY would be read as a column
    // position.
    if let Expr::Literal(Literal::Integer(_)) = replacement {
        let cast = Expr::Cast {
            expr: Box::new(replacement.clone()),
            type_name: "INTEGER".into(),
        };
        let is_target = |e: &Expr| matches!(e, Expr::Llm(f) if f.id == id);
        for_each_query_mut(q, &mut |query| {
            for o in &mut query.order_by {
                if is_target(&o.expr) {
                    o.expr = cast.clone();
                }
            }
        });
        for_each_select_mut(q, &mut |s| {
            for g in &mut s.group_by {
                if is_target(g) {
                    *g = cast.clone();
                }
            }
        });
    }
    for_each_expr_mut(q, &mut |e| {
        if matches!(e, Expr::Llm(f) if f.id == id) {
            *e = replacement.clone();
        }
    });
}

/// Rewrites IN and VALUES positions of `id`; other positions are untouched.
fn replace_list_positions(q: &mut Query, id: NodeId, items: &[SqlValue]) {
    for_each_expr_mut(q, &mut |e| {
        if let Expr::InFunction { expr, negated, function } = e {
            if function.id == id {
                *e = Expr::InList {
                    expr: expr.clone(),
                    negated: *negated,
                    list: items.iter().map(value_expr).collect(),
                };
            }
        }
    });
    for_each_table_factor_mut(q, &mut |f| {
        if let TableFactor::LlmValues { function, alias } = f {
            if function.id == id {
                *f = TableFactor::Derived {
                    subquery: Box::new(values_query(items.iter().map(|v| vec![value_expr(v)]).collect())),
                    alias: alias.clone(),
                };
            }
        }
    });
}

fn replace_list(q: &mut Query, id: NodeId, items: &[SqlValue]) {
    replace_list_positions(q, id, items);
    let joined = items.iter().map(SqlValue::to_string).collect::<Vec<_>>().join(", ");
    replace_function(q, id, Expr::Literal(Literal::Text(joined)));
}

/// Removes a failed function so execution can continue.
fn replace_with_null(q: &mut Query, id: NodeId) {
    replace_list_positions(q, id, &[]);
    replace_function(q, id, Expr::Literal(Literal::Null));
}

impl Session<'_> {
    fn query(&mut self, sql: &str) -> Result<ResultSet> {
        self.report.native_statements += 1;
        self.db.query(sql)
    }

    fn close(&mut self) {
        for t in self.temp_tables.drain(..).rev() {
            let _ = self.db.drop_table(&t);
        }
    }

    /// Smallest session number not already used by leftover tables.
    fn pick_id(&mut self) -> Result<()> {
        let existing = self.db.table_names()?;
        let mut n = 0;
        while existing.iter().any(|t| t.starts_with(&format!("__bsql_{n}_"))) {
            n += 1;
        }
        self.id = n.to_string();
        Ok(())
    }

    fn run<B: ModelBackend + ?Sized>(&mut self, text: &str, backend: &B) -> Result<ResultSet> {
        let mut ast = parse(text)?;
        self.pick_id()?;
        while let Some(&id) = plan(&ast).function_order().first() {
            if let Err(e) = self.run_function(&mut ast, id, backend) {
                if !self.opts.keep_going {
                    return Err(e);
                }
                self.report.errors.push(ReportedError::from_error(&e));
                replace_with_null(&mut ast, id);
            }
        }
        let sql = render_query(&ast);
        self.report.final_sql = Some(sql.clone());
        self.query(&sql)
    }

    fn cte_table(&self, name: &str) -> String {
        format!("__bsql_{}_cte_{}", self.id, name.to_lowercase())
    }

    /// Materializes the CTEs among `tables` and points references at them.
    fn materialize_ctes(&mut self, ast: &mut Query, tables: &[String]) -> Result<()> {
        for t in tables {
            let Some((earlier, cte)) = scope::find_cte(ast, t) else {
                continue;
            };
            let body = Query {
                with: earlier,
                ..cte.query.clone()
            };
            let temp = self.cte_table(&cte.name.value);
            let sql = if cte.columns.is_empty() {
                render_query(&body)
            } else {
                let cols: Vec<String> = cte.columns.iter().map(|c| quote_ident(&c.value)).collect();
                format!(
                    "SELECT * FROM ({}) AS __cte({})",
                    render_query(&body),
                    cols.join(", ")
                )
            };
            self.report.native_statements += 1;
            self.db.create_temp_table_as(&temp, &sql)?;
            self.temp_tables.push(temp.clone());
        if let Some(fr) = self.report.functions.last_mut() {
            fr.temp_table = Some(temp.clone());
        }
            self.ctes.insert(cte.name.value.to_lowercase(), temp.clone());
            scope::replace_cte(ast, &cte.name.value, &temp);
        }
        Ok(())
    }

    /// Real table name behind `name` as written in the query.
    fn resolve_table(&self, owner: Option<&Select>, name: &str) -> String {
        if let Some(TableFactor::Table { name: real, .. }) = owner.and_then(|s| scope::visible_factor(s, name)) {
            return real.value.clone();
        }
        self.ctes.get(&name.to_lowercase()).cloned().unwrap_or_else(|| name.to_string())
    }

    fn column_values(&mut self, col: &ColumnRef, owner: Option<&Select>) -> Result<Vec<SqlValue>> {
        let from = match (owner, &col.table) {
            (Some(s), t) if !s.from.is_empty() => scope_from(s, t.as_ref().map(|t| t.value.as_str())),
            _ => Vec::new(),
        };
        let from = if from.is_empty() {
            let Some(t) = &col.table else {
                return Err(Error::ColumnReference(format!(
                    "column {} has no table in scope",
                    col.column.value
                )));
            };
            vec![TableWithJoins {
                relation: TableFactor::Table {
                    name: Ident::new(self.resolve_table(owner, &t.value)),
                    alias: Some(t.clone()),
                },
                joins: Vec::new(),
            }]
        } else {
            from
        };
        let expr = Expr::Column(col.clone());
        let q = Query::from_select(Select {
            distinct: true,
            projection: vec![SelectItem::Expr { expr: expr.clone(), alias: None }],
            from,
            selection: Some(Expr::IsNull {
                expr: Box::new(expr),
                negated: true,
            }),
            ..Select::default()
        });
        Ok(first_column(self.query(&render_query(&q))?))
    }

    fn searcher<'s>(&'s self, f: &LlmFunction) -> Result<Option<Searcher<'s>>> {
        let named = f.search.as_ref().and_then(|s| s.store.clone());
        let k = f
            .search
            .as_ref()
            .and_then(|s| s.k)
            .unwrap_or(if f.kind == FunctionKind::Qa { self.opts.k_qa } else { self.opts.k_search });
        let stores = &self.opts.stores;
        let store = match named {
            Some(n) => Some(
                stores
                    .get(&n)
                    .ok_or_else(|| Error::Store(format!("no document store named `{n}`")))?,
            ),
            None => match f.kind {
                FunctionKind::SearchMap => Some(
                    stores
                        .get(DEFAULT_STORE)
                        .or_else(|| (stores.len() == 1).then(|| stores.values().next()).flatten())
                        .ok_or_else(|| Error::Store(format!("{} needs a document store", f.kind)))?,
                ),
                _ => stores.get(DEFAULT_STORE),
            },
        };
        Ok(store.map(|s| Searcher { store: s, k }))
    }

    fn infer(
        &mut self,
        ast: &Query,
        f: &LlmFunction,
        owner: Option<&Select>,
        options: Option<&[SqlValue]>,
    ) -> Result<Inference> {
        let cfg = self.opts.functions.types;
        let result = infer_return_type(ast, f.id, &mut |col| self.column_values(col, owner), options, &cfg);
        match result {
            Err(e @ (Error::LiteralSetTooLarge { .. } | Error::EmptyLiteralSet(_))) => {
                let rule = locate_context(ast, f.id).unwrap_or(ContextRule::Unconstrained);
                let ty = if matches!(rule, ContextRule::InColumn(_) | ContextRule::InExpr | ContextRule::Values) {
                    InferredType::list_of(InferredType::Any, f.quantifier)
                } else {
                    InferredType::Any
                };
                Ok(Inference {
                    rule,
                    ty,
                    originals: Vec::new(),
                    note: Some(format!("node {}: {e}; falling back to free text", f.id)),
                })
            }
            other => other,
        }
    }

    fn run_function<B: ModelBackend + ?Sized>(&mut self, ast: &mut Query, id: NodeId, backend: &B) -> Result<()> {
        let f = functions(ast)
            .into_iter()
            .find(|f| f.id == id)
            .cloned()
            .ok_or_else(|| Error::Internal(format!("function node {id} vanished")))?;

        let mut tables: Vec<String> = Vec::new();
        for a in f.args.iter().chain(f.options.iter()) {
            match a {
                FunctionArg::Subquery(q) => tables.extend(table_names(q)),
                FunctionArg::Column(c) => tables.extend(c.table.iter().map(|t| t.value.clone())),
                FunctionArg::Literal(_) => {}
            }
        }
        if let Some(owner) = scope::owner_select(ast, id) {
            tables.extend(table_names(&Query::from_select(Select {
                from: owner.from.clone(),
                ..Select::default()
            })));
        }
        self.materialize_ctes(ast, &tables)?;
        let owner = scope::owner_select(ast, id);

        let options = match &f.options {
            None => None,
            Some(FunctionArg::Subquery(q)) => Some(first_column(
                self.query(&render_query(q)).map_err(inside_function)?,
            )),
            Some(FunctionArg::Column(c)) => Some(self.column_values(c, owner.as_ref()).map_err(inside_function)?),
            Some(FunctionArg::Literal(l)) => Some(vec![literal_value(l)]),
        };
        let inference = self.infer(ast, &f, owner.as_ref(), options.as_deref())?;
        if let Some(n) = &inference.note {
            self.report.notes.push(n.clone());
        }
        if f.kind == FunctionKind::Qa {
            self.run_qa(ast, &f, owner.as_ref(), &inference, backend)
        } else {
            self.run_map(ast, &f, owner.as_ref(), &inference, backend)
        }
    }

    fn record(&mut self, f: &LlmFunction, inference: &Inference, stats: &GenerationStats, mut fr: FunctionReport) {
        self.report.lm_generations += stats.generations;
        self.report.forward_passes += stats.cache.forward_passes;
        self.report.prefix_forward_passes += stats.cache.prefix_forward_passes;
        self.report.prefix_cache_hits += stats.cache.cache_hits;
        fr.node = f.id as usize;
        fr.kind = f.kind.name().to_string();
        fr.question = f.question.clone();
        fr.context = inference.rule.describe();
        fr.inferred_type = inference.signature();
        fr.generations = stats.generations;
        fr.forward_passes = stats.cache.forward_passes;
        self.report.functions.push(fr);
    }

    fn restore(inference: &Inference, v: SqlValue) -> SqlValue {
        match &v {
            SqlValue::Text(s) => inference.original(s).cloned().unwrap_or(v),
            _ => v,
        }
    }

    fn run_qa<B: ModelBackend + ?Sized>(
        &mut self,
        ast: &mut Query,
        f: &LlmFunction,
        owner: Option<&Select>,
        inference: &Inference,
        backend: &B,
    ) -> Result<()> {
        let fills = f.placeholder_count() > 0;
        let mut fill_args: Vec<Vec<SqlValue>> = Vec::new();
        let mut context: Vec<Vec<SqlValue>> = Vec::new();
        for a in &f.args {
            match a {
                FunctionArg::Subquery(q) => {
                    let rs = self.query(&render_query(q)).map_err(inside_function)?;
                    if rs.rows.is_empty() {
                        return Err(Error::EmptyContext(format!(
                            "{} argument `{}` returned no rows",
                            f.kind,
                            render_query(q)
                        )));
                    }
                    if fills {
                        fill_args.push(first_column(rs));
                    } else {
                        context.extend(rs.rows);
                    }
                }
                FunctionArg::Literal(l) if fills => fill_args.push(vec![literal_value(l)]),
                FunctionArg::Literal(l) => context.push(vec![literal_value(l)]),
                FunctionArg::Column(c) => {
                    let values = self.column_values(c, owner).map_err(inside_function)?;
                    if values.is_empty() {
                        return Err(Error::EmptyContext(format!(
                            "column {} has no values",
                            render_expr(&Expr::Column(c.clone()))
                        )));
                    }
                    context.extend(values.into_iter().map(|v| vec![v]));
                }
            }
        }
        let question = fill_placeholders(&f.question, &fill_args)?;
        let searcher = self.searcher(f)?;
        let out = llmqa(
            backend,
            &QaRequest {
                question: &question,
                context: &context,
                ty: &inference.ty,
                searcher,
            },
            &self.opts.functions,
        )?;
        // Recorded before any check so failed items still show their cost.
        self.record(
            f,
            inference,
            &out.stats,
            FunctionReport {
                outputs: vec![out.raw.clone()],
                ..FunctionReport::default()
            },
        );
        let constrained = self.opts.functions.policy == TypingPolicy::Constrained;
        match out.value {
            Coerced::Scalar(v) => {
                let v = Self::restore(inference, v);
                if !constrained {
                    check_affinity(&v, &inference.ty)?;
                }
                replace_function(ast, f.id, value_expr(&v));
            }
            Coerced::List(items) => {
                let items: Vec<SqlValue> = items.into_iter().map(|v| Self::restore(inference, v)).collect();
                replace_list(ast, f.id, &items);
            }
        }
        Ok(())
    }

    fn run_map<B: ModelBackend + ?Sized>(
        &mut self,
        ast: &mut Query,
        f: &LlmFunction,
        owner: Option<&Select>,
        inference: &Inference,
        backend: &B,
    ) -> Result<()> {
        let column = f
            .map_column()
            .cloned()
            .ok_or_else(|| Error::InvalidFunction(format!("{} needs a table.column argument", f.kind)))?;
        let table = column
            .table
            .as_ref()
            .map(|t| t.value.clone())
            .ok_or_else(|| Error::InvalidFunction(format!("{} needs a table.column argument", f.kind)))?;
        let shown = render_expr(&Expr::Column(column.clone()));

        let factor = owner.and_then(|s| scope::visible_factor(s, &table)).cloned();
        let needs_from = owner.map_or(true, |s| s.from.is_empty());
        let check_table = match &factor {
            Some(TableFactor::Table { name, .. }) => Some(name.value.clone()),
            Some(_) => None,
            None if needs_from => Some(self.resolve_table(None, &table)),
            None => {
                return Err(match self.db.table_columns(&table)? {
                    None => Error::HallucinatedTable(table.clone()),
                    Some(_) => Error::ColumnReference(format!(
                        "table {table} used by {shown} is not in the FROM clause"
                    )),
                })
            }
        };
        if let Some(real) = &check_table {
            match self.db.table_columns(real)? {
                None => return Err(Error::HallucinatedTable(table.clone())),
                Some(cols) if !cols.iter().any(|c| column.column.matches(c)) => {
                    return Err(Error::HallucinatedColumn(shown))
                }
                Some(_) => {}
            }
        }

        // Input values, pre-filtered by the native part of the WHERE clause.
        let base_from = match owner {
            Some(s) if !needs_from => scope_from(s, Some(&table)),
            _ => vec![TableWithJoins {
                relation: TableFactor::Table {
                    name: Ident::new(check_table.clone().unwrap_or_else(|| table.clone())),
                    alias: None,
                },
                joins: Vec::new(),
            }],
        };
        let full_scope = owner.is_some_and(|s| s.from == base_from);
        let col_expr = Expr::Column(column.clone());
        let not_null = Expr::IsNull {
            expr: Box::new(col_expr.clone()),
            negated: true,
        };
        let values_sql = |filters: Vec<Expr>| {
            let mut conds = filters;
            conds.push(not_null.clone());
            render_query(&Query::from_select(Select {
                distinct: true,
                projection: vec![SelectItem::Expr {
                    expr: col_expr.clone(),
                    alias: None,
                }],
                from: base_from.clone(),
                selection: scope::and_all(conds),
                ..Select::default()
            }))
        };
        let filters = match owner {
            Some(s) if full_scope => scope::native_conjuncts(s),
            _ => Vec::new(),
        };
        let values = if filters.is_empty() {
            first_column(self.query(&values_sql(Vec::new())).map_err(inside_function)?)
        } else {
            match self.query(&values_sql(filters)) {
                Ok(rs) => first_column(rs),
                Err(e) => {
                    self.report
                        .notes
                        .push(format!("node {}: eager filter skipped ({e})", f.id));
                    first_column(self.query(&values_sql(Vec::new())).map_err(inside_function)?)
                }
            }
        };

        let searcher = match f.kind {
            FunctionKind::SearchMap => self.searcher(f)?,
            _ => None,
        };
        let out = llmmap(
            backend,
            &MapRequest {
                question: &f.question,
                column: &column,
                values: &values,
                ty: &inference.ty,
                searcher,
            },
            &self.opts.functions,
        )?;
        self.record(
            f,
            inference,
            &out.stats,
            FunctionReport {
                distinct_inputs: Some(out.rows.len()),
                outputs: out.raw.clone(),
                ..FunctionReport::default()
            },
        );
        if self.opts.functions.policy != TypingPolicy::Constrained {
            for (_, v) in &out.rows {
                check_affinity(v, &inference.ty)?;
            }
        }
        let temp = format!("__bsql_{}_{}", self.id, f.id);
        let rows: Vec<Vec<SqlValue>> = out
            .rows
            .iter()
            .map(|(k, v)| vec![k.clone(), Self::restore(inference, v.clone())])
            .collect();
        self.report.native_statements += 1;
        self.db.create_temp_table(&temp, &[VALUE_COLUMN, OUTPUT_COLUMN], &rows)?;
        self.temp_tables.push(temp.clone());
        if let Some(fr) = self.report.functions.last_mut() {
            fr.temp_table = Some(temp.clone());
        }

        let join = Join {
            operator: JoinOperator::Left,
            relation: TableFactor::Table {
                name: Ident::new(&temp),
                alias: None,
            },
            constraint: JoinConstraint::On(Expr::binary(
                col_expr.clone(),
                BinaryOp::Eq,
                Expr::column(Some(&temp), VALUE_COLUMN),
            )),
        };
        let source = base_from.first().map(|t| t.relation.clone());
        let injected = scope::with_owner_mut(ast, f.id, &mut |s| {
            if s.from.is_empty() {
                if let Some(relation) = source.clone() {
                    s.from.push(TableWithJoins {
                        relation,
                        joins: Vec::new(),
                    });
                }
            }
            let idx = s
                .from
                .iter()
                .position(|t| {
                    std::iter::once(&t.relation)
                        .chain(t.joins.iter().map(|j| &j.relation))
                        .any(|r| r.visible_name().is_some_and(|n| n.matches(&table)))
                })
                .unwrap_or(0);
            if let Some(t) = s.from.get_mut(idx) {
                t.joins.push(join.clone());
            }
        });
        if !injected {
            return Err(Error::InvalidFunction(format!(
                "{} at node {} has no enclosing SELECT to join into",
                f.kind, f.id
            )));
        }
        replace_function(ast, f.id, Expr::column(Some(&temp), OUTPUT_COLUMN));
        Ok(())
    }
}
