//! Structured representation of a query in the Spider SQL subset.
//!
//! Identifiers are stored lowercased. After binding, every
//! [`ColumnRef::Column`] carries the schema table it resolves to; the
//! alias used in the source text is kept in `qualifier` so the query can be
//! rendered back faithfully, and is erased by normalization.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SqlAst {
    pub select: Select,
    pub from: From,
    pub where_: Option<Condition>,
    pub group_by: Vec<ColUnit>,
    pub having: Option<Condition>,
    pub order_by: Option<OrderBy>,
    pub limit: Option<u64>,
    pub set_op: Option<(SetOpKind, Box<SqlAst>)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SelectItem {
    pub agg: AggOp,
    pub val: ValUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum AggOp {
    None,
    Max,
    Min,
    Count,
    Sum,
    Avg,
}

impl AggOp {
    pub fn from_word(word: &str) -> Option<AggOp> {
        Some(match word {
            "max" => AggOp::Max,
            "min" => AggOp::Min,
            "count" => AggOp::Count,
            "sum" => AggOp::Sum,
            "avg" => AggOp::Avg,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AggOp::None => "",
            AggOp::Max => "max",
            AggOp::Min => "min",
            AggOp::Count => "count",
            AggOp::Sum => "sum",
            AggOp::Avg => "avg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum UnitOp {
    None,
    Minus,
    Plus,
    Times,
    Divide,
}

impl UnitOp {
    pub fn as_str(self) -> &'static str {
        match self {
            UnitOp::None => "",
            UnitOp::Minus => "-",
            UnitOp::Plus => "+",
            UnitOp::Times => "*",
            UnitOp::Divide => "/",
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, UnitOp::Plus | UnitOp::Times)
    }
}

/// `left [op right]`, e.g. `T1.a - T2.b` or plain `count(*)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ValUnit {
    pub op: UnitOp,
    pub left: ColUnit,
    pub right: Option<ColUnit>,
}

impl ValUnit {
    pub fn column(col: ColUnit) -> ValUnit {
        ValUnit { op: UnitOp::None, left: col, right: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ColUnit {
    pub agg: AggOp,
    pub col: ColumnRef,
    pub distinct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum ColumnRef {
    Star { qualifier: Option<String> },
    Column { table: String, column: String, qualifier: Option<String> },
}

impl ColumnRef {
    pub fn qualifier(&self) -> Option<&str> {
        match self {
            ColumnRef::Star { qualifier } | ColumnRef::Column { qualifier, .. } => {
                qualifier.as_deref()
            }
        }
    }

    /// `(table, column)` for a bound, non-star column.
    pub fn resolved(&self) -> Option<(&str, &str)> {
        match self {
            ColumnRef::Column { table, column, .. } => Some((table, column)),
            ColumnRef::Star { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct From {
    pub tables: Vec<TableUnit>,
    /// Join conditions, merged across all `ON` clauses.
    pub conds: Option<Condition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum TableUnit {
    Table { name: String, alias: Option<String> },
    Subquery { query: Box<SqlAst>, alias: Option<String> },
}

impl TableUnit {
    pub fn alias(&self) -> Option<&str> {
        match self {
            TableUnit::Table { alias, .. } | TableUnit::Subquery { alias, .. } => alias.as_deref(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Conj {
    And,
    Or,
}

/// Flat list of comparisons joined left to right by `AND`/`OR`.
///
/// `conjs.len() == units.len() - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Condition {
    pub units: Vec<CondUnit>,
    pub conjs: Vec<Conj>,
}

impl Condition {
    pub fn single(unit: CondUnit) -> Condition {
        Condition { units: vec![unit], conjs: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CmpOp {
    Between,
    Eq,
    Gt,
    Lt,
    Ge,
    Le,
    Ne,
    In,
    Like,
    Is,
    Exists,
}

impl CmpOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Between => "BETWEEN",
            CmpOp::Eq => "=",
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Le => "<=",
            CmpOp::Ne => "!=",
            CmpOp::In => "IN",
            CmpOp::Like => "LIKE",
            CmpOp::Is => "IS",
            CmpOp::Exists => "EXISTS",
        }
    }

    /// Position of the operator in the reference scorer's operator table.
    pub fn reference_index(self) -> u8 {
        match self {
            CmpOp::Between => 1,
            CmpOp::Eq => 2,
            CmpOp::Gt => 3,
            CmpOp::Lt => 4,
            CmpOp::Ge => 5,
            CmpOp::Le => 6,
            CmpOp::Ne => 7,
            CmpOp::In => 8,
            CmpOp::Like => 9,
            CmpOp::Is => 10,
            CmpOp::Exists => 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CondUnit {
    pub not: bool,
    pub op: CmpOp,
    pub val: ValUnit,
    pub value: Value,
    /// Upper bound of `BETWEEN`.
    pub value2: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Value {
    /// Numeric literal as written.
    Number(String),
    Text(String),
    Column(ColUnit),
    Subquery(Box<SqlAst>),
    Null,
}

impl Value {
    pub fn is_literal(&self) -> bool {
        matches!(self, Value::Number(_) | Value::Text(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Direction {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct OrderBy {
    pub items: Vec<ValUnit>,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SetOpKind {
    Intersect,
    Union,
    Except,
}

impl SetOpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SetOpKind::Intersect => "INTERSECT",
            SetOpKind::Union => "UNION",
            SetOpKind::Except => "EXCEPT",
        }
    }
}

impl SqlAst {
    /// Every query nested in this one: FROM subqueries, condition subqueries
    /// and the set-operation operand. Not recursive.
    pub fn children(&self) -> Vec<&SqlAst> {
        let mut out = Vec::new();
        for t in &self.from.tables {
            if let TableUnit::Subquery { query, .. } = t {
                out.push(query.as_ref());
            }
        }
        for cond in [self.from.conds.as_ref(), self.where_.as_ref(), self.having.as_ref()]
            .into_iter()
            .flatten()
        {
            for unit in &cond.units {
                for v in std::iter::once(&unit.value).chain(unit.value2.as_ref()) {
                    if let Value::Subquery(q) = v {
                        out.push(q.as_ref());
                    }
                }
            }
        }
        if let Some((_, rhs)) = &self.set_op {
            out.push(rhs.as_ref());
        }
        out
    }

    /// Depth-first walk over this query and every nested query.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a SqlAst)) {
        f(self);
        for child in self.children() {
            child.walk(f);
        }
    }

    /// Names of the schema tables listed directly in FROM.
    pub fn from_table_names(&self) -> Vec<&str> {
        self.from
            .tables
            .iter()
            .filter_map(|t| match t {
                TableUnit::Table { name, .. } => Some(name.as_str()),
                TableUnit::Subquery { .. } => None,
            })
            .collect()
    }

    pub fn has_aggregate(&self) -> bool {
        self.select.items.iter().any(|i| i.agg != AggOp::None || i.val.left.agg != AggOp::None)
    }
}
