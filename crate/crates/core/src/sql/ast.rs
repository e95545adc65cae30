//! Syntax tree for the SQL subset plus embedded `{{ ... }}` function nodes.
//!
//! The tree is normalized: redundant parentheses are not represented,
//! keyword spellings are canonical (`<>` for `!=`, `=` for `==`), and
//! `LIMIT offset, count` is stored as `LIMIT count OFFSET offset`.

use std::fmt;

/// Identifies a function node within one parsed query. Assigned in pre-order.
pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct Ident {
    pub value: String,
    pub quoted: bool,
}

impl Ident {
    pub fn new(value: impl Into<String>) -> Self {
        Ident {
            value: value.into(),
            quoted: false,
        }
    }

    pub fn quoted(value: impl Into<String>) -> Self {
        Ident {
            value: value.into(),
            quoted: true,
        }
    }

    /// Identifiers match case-insensitively.
    pub fn matches(&self, other: &str) -> bool {
        self.value.to_lowercase() == other.to_lowercase()
    }

    pub fn normalized(&self) -> String {
        self.value.to_lowercase()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnRef {
    pub table: Option<Ident>,
    pub column: Ident,
}

impl ColumnRef {
    pub fn new(table: Option<&str>, column: &str) -> Self {
        ColumnRef {
            table: table.map(Ident::new),
            column: Ident::new(column),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Null,
    Bool(bool),
    Integer(i64),
    Real(f64),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    NotEq,
    Is,
    IsNot,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Plus,
    Minus,
    Multiply,
    Divide,
    Modulo,
    Concat,
}

impl BinaryOp {
    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq
                | BinaryOp::NotEq
                | BinaryOp::Lt
                | BinaryOp::LtEq
                | BinaryOp::Gt
                | BinaryOp::GtEq
                | BinaryOp::Is
                | BinaryOp::IsNot
        )
    }

    pub fn is_equality(self) -> bool {
        matches!(self, BinaryOp::Eq | BinaryOp::NotEq)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "OR",
            BinaryOp::And => "AND",
            BinaryOp::Eq => "=",
            BinaryOp::NotEq => "<>",
            BinaryOp::Is => "IS",
            BinaryOp::IsNot => "IS NOT",
            BinaryOp::Lt => "<",
            BinaryOp::LtEq => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::GtEq => ">=",
            BinaryOp::Plus => "+",
            BinaryOp::Minus => "-",
            BinaryOp::Multiply => "*",
            BinaryOp::Divide => "/",
            BinaryOp::Modulo => "%",
            BinaryOp::Concat => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::NotEq | BinaryOp::Is | BinaryOp::IsNot => 4,
            BinaryOp::Lt | BinaryOp::LtEq | BinaryOp::Gt | BinaryOp::GtEq => 5,
            BinaryOp::Plus | BinaryOp::Minus => 6,
            BinaryOp::Multiply | BinaryOp::Divide | BinaryOp::Modulo => 7,
            BinaryOp::Concat => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionArgs {
    /// `COUNT(*)`
    Star,
    List { distinct: bool, args: Vec<Expr> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionCall {
    pub name: Ident,
    pub args: FunctionArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Literal),
    Column(ColumnRef),
    Unary {
        op: UnaryOp,
        expr: Box<Expr>,
    },
    Binary {
        left: Box<Expr>,
        op: BinaryOp,
        right: Box<Expr>,
    },
    Like {
        expr: Box<Expr>,
        negated: bool,
        pattern: Box<Expr>,
    },
    Between {
        expr: Box<Expr>,
        negated: bool,
        low: Box<Expr>,
        high: Box<Expr>,
    },
    InList {
        expr: Box<Expr>,
        negated: bool,
        list: Vec<Expr>,
    },
    InSubquery {
        expr: Box<Expr>,
        negated: bool,
        subquery: Box<Query>,
    },
    /// `expr IN {{ ... }}`: the function produces the list.
    InFunction {
        expr: Box<Expr>,
        negated: bool,
        function: Box<LlmFunction>,
    },
    IsNull {
        expr: Box<Expr>,
        negated: bool,
    },
    Function(FunctionCall),
    Cast {
        expr: Box<Expr>,
        type_name: String,
    },
    Case {
        operand: Option<Box<Expr>>,
        branches: Vec<(Expr, Expr)>,
        else_result: Option<Box<Expr>>,
    },
    Subquery(Box<Query>),
    Exists {
        negated: bool,
        subquery: Box<Query>,
    },
    Llm(Box<LlmFunction>),
}

impl Expr {
    pub fn column(table: Option<&str>, column: &str) -> Expr {
        Expr::Column(ColumnRef::new(table, column))
    }

    pub fn binary(left: Expr, op: BinaryOp, right: Expr) -> Expr {
        Expr::Binary {
            left: Box::new(left),
            op,
            right: Box::new(right),
        }
    }

    /// Binding strength of the outermost construct; atoms bind tightest.
    pub fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => op.precedence(),
            Expr::Unary { op: UnaryOp::Not, .. } => 3,
            Expr::Unary { .. } => 9,
            Expr::Like { .. }
            | Expr::Between { .. }
            | Expr::InList { .. }
            | Expr::InSubquery { .. }
            | Expr::InFunction { .. }
            | Expr::IsNull { .. } => 4,
            Expr::Exists { .. } => 10,
            _ => 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FunctionKind {
    Qa,
    Map,
    SearchMap,
}

impl FunctionKind {
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "LLMQA" => Some(FunctionKind::Qa),
            "LLMMAP" => Some(FunctionKind::Map),
            "LLMSEARCHMAP" => Some(FunctionKind::SearchMap),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FunctionKind::Qa => "LLMQA",
            FunctionKind::Map => "LLMMap",
            FunctionKind::SearchMap => "LLMSearchMap",
        }
    }

    pub fn is_map(self) -> bool {
        matches!(self, FunctionKind::Map | FunctionKind::SearchMap)
    }
}

impl fmt::Display for FunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionArg {
    Subquery(Box<Query>),
    Column(ColumnRef),
    Literal(Literal),
}

/// Repetition bounds for list-valued answers, e.g. `{5}` or `{1,3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quantifier {
    pub min: usize,
    pub max: Option<usize>,
}

impl Quantifier {
    pub fn exactly(n: usize) -> Self {
        Quantifier {
            min: n,
            max: Some(n),
        }
    }

    /// Parses `{n}`, `{n,m}`, `{n,}`, `*` and `+`.
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        match text {
            "*" => return Some(Quantifier { min: 0, max: None }),
            "+" => return Some(Quantifier { min: 1, max: None }),
            _ => {}
        }
        let inner = text.strip_prefix('{')?.strip_suffix('}')?;
        let q = match inner.split_once(',') {
            None => Quantifier::exactly(inner.trim().parse().ok()?),
            Some((lo, hi)) => {
                let min = lo.trim().parse().ok()?;
                let hi = hi.trim();
                let max = if hi.is_empty() {
                    None
                } else {
                    Some(hi.parse().ok()?)
                };
                Quantifier { min, max }
            }
        };
        match q.max {
            Some(max) if max < q.min || max == 0 => None,
            _ => Some(q),
        }
    }
}

impl fmt::Display for Quantifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.max {
            Some(max) if max == self.min => write!(f, "{{{}}}", self.min),
            Some(max) => write!(f, "{{{},{}}}", self.min, max),
            None => write!(f, "{{{},}}", self.min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchConfig {
    pub store: Option<String>,
    pub k: Option<usize>,
}

/// A `{{ ... }}` node.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmFunction {
    pub id: NodeId,
    pub kind: FunctionKind,
    pub question: String,
    pub args: Vec<FunctionArg>,
    pub options: Option<FunctionArg>,
    pub quantifier: Option<Quantifier>,
    pub search: Option<SearchConfig>,
}

impl LlmFunction {
    /// Number of `{}` placeholders in the question template.
    pub fn placeholder_count(&self) -> usize {
        self.question.matches("{}").count()
    }

    /// The `table.column` argument of a map-style function.
    pub fn map_column(&self) -> Option<&ColumnRef> {
        self.args.iter().find_map(|a| match a {
            FunctionArg::Column(c) => Some(c),
            _ => None,
        })
    }

    pub fn non_column_args(&self) -> usize {
        self.args
            .iter()
            .filter(|a| !matches!(a, FunctionArg::Column(_)))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub with: Vec<Cte>,
    pub body: SetExpr,
    pub order_by: Vec<OrderByExpr>,
    pub limit: Option<Expr>,
    pub offset: Option<Expr>,
}

impl Query {
    pub fn from_select(select: Select) -> Self {
        Query {
            with: Vec::new(),
            body: SetExpr::Select(Box::new(select)),
            order_by: Vec::new(),
            limit: None,
            offset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cte {
    pub name: Ident,
    pub columns: Vec<Ident>,
    pub query: Query,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOperator {
    Union,
    Intersect,
    Except,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetExpr {
    Select(Box<Select>),
    Values(Vec<Vec<Expr>>),
    SetOperation {
        op: SetOperator,
        all: bool,
        left: Box<SetExpr>,
        right: Box<SetExpr>,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Select {
    pub distinct: bool,
    pub projection: Vec<SelectItem>,
    pub from: Vec<TableWithJoins>,
    pub selection: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub having: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectItem {
    Wildcard,
    QualifiedWildcard(Ident),
    Expr { expr: Expr, alias: Option<Ident> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableWithJoins {
    pub relation: TableFactor,
    pub joins: Vec<Join>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableFactor {
    Table {
        name: Ident,
        alias: Option<Ident>,
    },
    Derived {
        subquery: Box<Query>,
        alias: Option<Ident>,
    },
    /// `FROM VALUES {{ ... }}`
    LlmValues {
        function: Box<LlmFunction>,
        alias: Option<Ident>,
    },
}

impl TableFactor {
    /// Name by which columns of this relation are qualified in the query.
    pub fn visible_name(&self) -> Option<&Ident> {
        match self {
            TableFactor::Table { name, alias } => Some(alias.as_ref().unwrap_or(name)),
            TableFactor::Derived { alias, .. } | TableFactor::LlmValues { alias, .. } => {
                alias.as_ref()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinOperator {
    Inner,
    Left,
    Cross,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JoinConstraint {
    On(Expr),
    Using(Vec<Ident>),
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Join {
    pub operator: JoinOperator,
    pub relation: TableFactor,
    pub constraint: JoinConstraint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderByExpr {
    pub expr: Expr,
    pub asc: Option<bool>,
}
