//! Random query shapes over a schema whose tables all share one column set,
//! so any filling of a shape binds.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use text2sql_core::schema::{ColumnType as T, DatabaseSchema};

pub const DB_ID: &str = "gen";
pub const TABLES: [&str; 4] = ["g0", "g1", "g2", "g3"];
const NUMERIC: [&str; 3] = ["id", "n0", "n1"];
const TEXT: [&str; 2] = ["s0", "s1"];
const OPS: [&str; 6] = ["=", "!=", ">", "<", ">=", "<="];
const AGGS: [&str; 5] = ["count", "max", "min", "sum", "avg"];
const WORDS: [&str; 6] = ["alpha", "beta", "gamma", "delta", "omega", "sigma"];

pub fn schema() -> DatabaseSchema {
    let cols: &[(&str, T)] = &[("id", T::Number), ("n0", T::Number), ("n1", T::Number), ("s0", T::Text), ("s1", T::Text)];
    let tables: Vec<(&str, &[(&str, T)])> = TABLES.iter().map(|t| (*t, cols)).collect();
    DatabaseSchema::from_parts(DB_ID, &tables, &[]).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Item {
    pub agg: Option<usize>,
    pub numeric: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CondShape {
    pub op: usize,
    pub numeric: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersect,
    Except,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    pub select: Vec<Item>,
    pub join: bool,
    pub conds: Vec<CondShape>,
    pub or: bool,
    pub group: bool,
    pub having: bool,
    pub order: Option<bool>,
    pub limit: bool,
    pub set_op: Option<(SetOp, Box<Shape>)>,
}

fn item(rng: &mut impl Rng) -> Item {
    Item { agg: rng.gen_bool(0.3).then(|| rng.gen_range(0..AGGS.len())), numeric: rng.gen_bool(0.5) }
}

fn cond(rng: &mut impl Rng) -> CondShape {
    let numeric = rng.gen_bool(0.6);
    CondShape { op: if numeric { rng.gen_range(0..OPS.len()) } else { rng.gen_range(0..2) }, numeric }
}

/// A random shape; `depth` > 0 allows one set operation.
pub fn shape(rng: &mut impl Rng, depth: u32) -> Shape {
    let group = rng.gen_bool(0.25);
    Shape {
        select: (0..rng.gen_range(1..=3)).map(|_| item(rng)).collect(),
        join: rng.gen_bool(0.3),
        conds: (0..rng.gen_range(0..=3)).map(|_| cond(rng)).collect(),
        or: rng.gen_bool(0.3),
        group,
        having: group && rng.gen_bool(0.5),
        order: rng.gen_bool(0.3).then(|| rng.gen_bool(0.5)),
        limit: rng.gen_bool(0.2),
        set_op: (depth > 0 && rng.gen_bool(0.2)).then(|| {
            let op = *[SetOp::Union, SetOp::Intersect, SetOp::Except].choose(rng).unwrap();
            (op, Box::new(shape(rng, 0)))
        }),
    }
}

/// Names, literals and LIMIT counts chosen afresh; structure from `s`.
pub fn fill(s: &Shape, rng: &mut impl Rng) -> String {
    let tables: Vec<&str> = TABLES.choose_multiple(rng, 2).copied().collect();
    let col = |numeric: bool, rng: &mut dyn rand::RngCore| -> String {
        let name = if numeric { *NUMERIC.choose(rng).unwrap() } else { *TEXT.choose(rng).unwrap() };
        if s.join {
            format!("{}.{name}", if rng.gen_bool(0.5) { "T1" } else { "T2" })
        } else {
            name.to_string()
        }
    };
    let items: Vec<String> = s
        .select
        .iter()
        .map(|i| match i.agg {
            Some(a) => format!("{}({})", AGGS[a], col(i.numeric, rng)),
            None => col(i.numeric, rng),
        })
        .collect();
    let mut sql = format!("SELECT {} FROM ", items.join(", "));
    if s.join {
        sql.push_str(&format!("{} AS T1 JOIN {} AS T2 ON T1.id = T2.id", tables[0], tables[1]));
    } else {
        sql.push_str(tables[0]);
    }
    if !s.conds.is_empty() {
        let conds: Vec<String> = s
            .conds
            .iter()
            .map(|c| {
                let value = if c.numeric {
                    rng.gen_range(0..1000).to_string()
                } else {
                    format!("'{}'", WORDS.choose(rng).unwrap())
                };
                format!("{} {} {value}", col(c.numeric, rng), OPS[c.op])
            })
            .collect();
        sql.push_str(" WHERE ");
        sql.push_str(&conds.join(if s.or { " OR " } else { " AND " }));
    }
    if s.group {
        sql.push_str(&format!(" GROUP BY {}", col(rng.gen_bool(0.5), rng)));
        if s.having {
            sql.push_str(&format!(" HAVING count(*) > {}", rng.gen_range(0..10)));
        }
    }
    if let Some(desc) = s.order {
        sql.push_str(&format!(" ORDER BY {}{}", col(true, rng), if desc { " DESC" } else { "" }));
    }
    if s.limit {
        sql.push_str(&format!(" LIMIT {}", rng.gen_range(1..20)));
    }
    if let Some((op, inner)) = &s.set_op {
        let kw = match op {
            SetOp::Union => "UNION",
            SetOp::Intersect => "INTERSECT",
            SetOp::Except => "EXCEPT",
        };
        sql.push_str(&format!(" {kw} {}", fill(inner, rng)));
    }
    sql
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClauseEdit {
    AddCondition,
    DropCondition,
    ToggleGroup,
    ToggleHaving,
    ToggleOrder,
    ToggleLimit,
    ToggleSetOp,
    AddSelectItem,
    DropSelectItem,
    ToggleJoin,
}

impl ClauseEdit {
    pub const ALL: [ClauseEdit; 10] = [
        ClauseEdit::AddCondition,
        ClauseEdit::DropCondition,
        ClauseEdit::ToggleGroup,
        ClauseEdit::ToggleHaving,
        ClauseEdit::ToggleOrder,
        ClauseEdit::ToggleLimit,
        ClauseEdit::ToggleSetOp,
        ClauseEdit::AddSelectItem,
        ClauseEdit::DropSelectItem,
        ClauseEdit::ToggleJoin,
    ];
}

/// Inserts or deletes one clause or clause element, or `None` if `edit`
/// does not apply to `s`.
pub fn edit_clause(s: &Shape, edit: ClauseEdit, rng: &mut impl Rng) -> Option<Shape> {
    let mut out = s.clone();
    match edit {
        ClauseEdit::AddCondition => out.conds.push(cond(rng)),
        ClauseEdit::DropCondition => {
            if s.conds.is_empty() {
                return None;
            }
            out.conds.remove(rng.gen_range(0..s.conds.len()));
        }
        ClauseEdit::ToggleGroup => {
            out.group = !s.group;
            out.having = false;
        }
        ClauseEdit::ToggleHaving => {
            if !s.group {
                return None;
            }
            out.having = !s.having;
        }
        ClauseEdit::ToggleOrder => out.order = if s.order.is_some() { None } else { Some(rng.gen_bool(0.5)) },
        ClauseEdit::ToggleLimit => out.limit = !s.limit,
        ClauseEdit::ToggleSetOp => {
            out.set_op = match &s.set_op {
                Some(_) => None,
                None => Some((SetOp::Union, Box::new(shape(rng, 0)))),
            }
        }
        ClauseEdit::AddSelectItem => out.select.push(item(rng)),
        ClauseEdit::DropSelectItem => {
            if s.select.len() < 2 {
                return None;
            }
            out.select.remove(rng.gen_range(0..s.select.len()));
        }
        ClauseEdit::ToggleJoin => out.join = !s.join,
    }
    Some(out)
}
