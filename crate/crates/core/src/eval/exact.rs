//! Exact-set match and hardness, computed on the same flattened form the
//! reference scorer uses so that its quirks carry over: join conditions only
//! reach the score through keywords, GROUP BY compares bare column names,
//! DISTINCT is ignored at the top level, foreign-key columns are merged, and
//! nested subqueries compare structurally with their values masked.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::schema::DatabaseSchema;
use crate::sql::{
    AggOp, CmpOp, ColUnit, ColumnRef, Condition, Conj, Direction, SqlAst, TableUnit, UnitOp, ValUnit,
    Value,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Hardness {
    Easy,
    Medium,
    Hard,
    Extra,
}

impl Hardness {
    pub const ALL: [Hardness; 4] = [Hardness::Easy, Hardness::Medium, Hardness::Hard, Hardness::Extra];

    pub fn as_str(self) -> &'static str {
        match self {
            Hardness::Easy => "easy",
            Hardness::Medium => "medium",
            Hardness::Hard => "hard",
            Hardness::Extra => "extra",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct OCol {
    agg: AggOp,
    id: String,
    distinct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
struct OVal {
    op: UnitOp,
    c1: OCol,
    c2: Option<OCol>,
}

#[derive(Debug, Clone, PartialEq)]
enum OValue {
    Masked,
    Number(f64),
    Text(String),
    Null,
    Col(OCol),
    Sql(Box<OSql>),
}

#[derive(Debug, Clone, PartialEq)]
struct OCondUnit {
    not: bool,
    op: u8,
    val: OVal,
    v1: OValue,
    v2: Option<OValue>,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct OCond {
    units: Vec<OCondUnit>,
    conjs: Vec<Conj>,
}

#[derive(Debug, Clone, PartialEq)]
enum OTable {
    Named(String),
    Sql(Box<OSql>),
}

#[derive(Debug, Clone, PartialEq)]
struct OSql {
    distinct: Option<bool>,
    select: Vec<(AggOp, OVal)>,
    tables: Vec<OTable>,
    from_conds: OCond,
    where_: OCond,
    group_by: Vec<OCol>,
    having: OCond,
    order_by: Option<(Direction, Vec<OVal>)>,
    limit: Option<u64>,
    intersect: Option<Box<OSql>>,
    union: Option<Box<OSql>>,
    except: Option<Box<OSql>>,
}

fn col_id(c: &ColumnRef) -> String {
    match c {
        ColumnRef::Star { .. } => "__all__".to_string(),
        ColumnRef::Column { table, column, .. } => format!("__{table}.{column}__"),
    }
}

fn lower_col(c: &ColUnit) -> OCol {
    OCol { agg: c.agg, id: col_id(&c.col), distinct: Some(c.distinct) }
}

fn lower_val(v: &ValUnit) -> OVal {
    OVal { op: v.op, c1: lower_col(&v.left), c2: v.right.as_ref().map(lower_col) }
}

fn lower_value(v: &Value) -> OValue {
    match v {
        Value::Number(n) => n.parse::<f64>().map(OValue::Number).unwrap_or_else(|_| OValue::Text(n.clone())),
        Value::Text(t) => OValue::Text(t.clone()),
        Value::Null => OValue::Null,
        Value::Column(c) => OValue::Col(lower_col(c)),
        Value::Subquery(q) => OValue::Sql(Box::new(lower(q))),
    }
}

fn lower_cond(c: Option<&Condition>) -> OCond {
    let Some(c) = c else { return OCond::default() };
    OCond {
        units: c
            .units
            .iter()
            .map(|u| OCondUnit {
                not: u.not,
                op: u.op.reference_index(),
                val: lower_val(&u.val),
                v1: lower_value(&u.value),
                v2: u.value2.as_ref().map(lower_value),
            })
            .collect(),
        conjs: c.conjs.clone(),
    }
}

fn lower(q: &SqlAst) -> OSql {
    let mut out = OSql {
        distinct: Some(q.select.distinct),
        select: q.select.items.iter().map(|i| (i.agg, lower_val(&i.val))).collect(),
        tables: q
            .from
            .tables
            .iter()
            .map(|t| match t {
                TableUnit::Table { name, .. } => OTable::Named(format!("__{name}__")),
                TableUnit::Subquery { query, .. } => OTable::Sql(Box::new(lower(query))),
            })
            .collect(),
        from_conds: lower_cond(q.from.conds.as_ref()),
        where_: lower_cond(q.where_.as_ref()),
        group_by: q.group_by.iter().map(lower_col).collect(),
        having: lower_cond(q.having.as_ref()),
        order_by: q.order_by.as_ref().map(|o| (o.direction, o.items.iter().map(lower_val).collect())),
        limit: q.limit,
        intersect: None,
        union: None,
        except: None,
    };
    if let Some((kind, rhs)) = &q.set_op {
        let rhs = Some(Box::new(lower(rhs)));
        match kind {
            crate::sql::SetOpKind::Intersect => out.intersect = rhs,
            crate::sql::SetOpKind::Union => out.union = rhs,
            crate::sql::SetOpKind::Except => out.except = rhs,
        }
    }
    out
}

/// Column id of every foreign-key endpoint mapped to the lowest-numbered
/// column of its group. Groups are formed the way the reference scorer
/// forms them, which does not merge transitively across earlier groups.
fn foreign_key_map(schema: &DatabaseSchema) -> HashMap<String, String> {
    let mut groups: Vec<BTreeSet<usize>> = Vec::new();
    for &(a, b) in &schema.foreign_keys {
        let idx = match groups.iter().position(|g| g.contains(&a) || g.contains(&b)) {
            Some(i) => i,
            None => {
                groups.push(BTreeSet::new());
                groups.len() - 1
            }
        };
        groups[idx].insert(a);
        groups[idx].insert(b);
    }
    let name = |id: usize| schema.column_by_global(id).map(|(t, c)| format!("__{t}.{c}__"));
    let mut map = HashMap::new();
    for g in groups {
        let Some(head) = g.iter().next().and_then(|&m| name(m)) else { continue };
        for &id in &g {
            if let Some(n) = name(id) {
                map.insert(n, head.clone());
            }
        }
    }
    map
}

fn mask_cond(c: &mut OCond) {
    for u in c.units.iter_mut() {
        for v in std::iter::once(&mut u.v1).chain(u.v2.as_mut()) {
            match v {
                OValue::Sql(q) => mask_values(q),
                other => *other = OValue::Masked,
            }
        }
    }
}

/// Literal and column values in conditions become masked. FROM subqueries
/// are left untouched.
fn mask_values(q: &mut OSql) {
    mask_cond(&mut q.from_conds);
    mask_cond(&mut q.having);
    mask_cond(&mut q.where_);
    for s in [&mut q.intersect, &mut q.except, &mut q.union].into_iter().flatten() {
        mask_values(s);
    }
}

struct ColRebuild<'a> {
    valid: BTreeSet<String>,
    kmap: &'a HashMap<String, String>,
}

impl ColRebuild<'_> {
    fn col(&self, c: &mut OCol) {
        if let Some(to) = self.kmap.get(&c.id) {
            let table = c.id.trim_start_matches("__").split('.').next().unwrap_or("");
            if self.valid.contains(table) {
                c.id = to.clone();
            }
        }
        c.distinct = None;
    }

    fn val(&self, v: &mut OVal) {
        self.col(&mut v.c1);
        if let Some(c2) = v.c2.as_mut() {
            self.col(c2);
        }
    }

    fn cond(&self, c: &mut OCond) {
        for u in c.units.iter_mut() {
            self.val(&mut u.val);
        }
    }

    fn sql(&self, q: &mut OSql) {
        for (_, v) in q.select.iter_mut() {
            self.val(v);
        }
        q.distinct = None;
        self.cond(&mut q.from_conds);
        self.cond(&mut q.where_);
        for c in q.group_by.iter_mut() {
            self.col(c);
        }
        if let Some((_, items)) = q.order_by.as_mut() {
            for v in items.iter_mut() {
                self.val(v);
            }
        }
        self.cond(&mut q.having);
        for s in [&mut q.intersect, &mut q.except, &mut q.union].into_iter().flatten() {
            self.sql(s);
        }
    }
}

fn prepare(q: &SqlAst, kmap: &HashMap<String, String>) -> OSql {
    let mut o = lower(q);
    mask_values(&mut o);
    let valid = o
        .tables
        .iter()
        .filter_map(|t| match t {
            OTable::Named(n) => Some(n.trim_start_matches("__").trim_end_matches("__").to_string()),
            OTable::Sql(_) => None,
        })
        .collect();
    ColRebuild { valid, kmap }.sql(&mut o);
    o
}

/// Counts items of `pred` that can be matched one-to-one in `gold`.
fn multiset_hits<T: PartialEq>(pred: &[T], gold: &[T]) -> usize {
    let mut left: Vec<&T> = gold.iter().collect();
    let mut hits = 0;
    for p in pred {
        if let Some(i) = left.iter().position(|g| *g == p) {
            left.swap_remove(i);
            hits += 1;
        }
    }
    hits
}

fn same_multiset<T: PartialEq>(pred: &[T], gold: &[T]) -> bool {
    pred.len() == gold.len() && multiset_hits(pred, gold) == pred.len()
}

fn keywords(q: &OSql) -> BTreeSet<&'static str> {
    let mut res = BTreeSet::new();
    if !q.where_.units.is_empty() {
        res.insert("where");
    }
    if !q.group_by.is_empty() {
        res.insert("group");
    }
    if !q.having.units.is_empty() {
        res.insert("having");
    }
    if let Some((dir, _)) = &q.order_by {
        res.insert(if *dir == Direction::Desc { "desc" } else { "asc" });
        res.insert("order");
    }
    if q.limit.is_some() {
        res.insert("limit");
    }
    if q.except.is_some() {
        res.insert("except");
    }
    if q.union.is_some() {
        res.insert("union");
    }
    if q.intersect.is_some() {
        res.insert("intersect");
    }
    let conds = [&q.from_conds, &q.where_, &q.having];
    if conds.iter().any(|c| c.conjs.contains(&Conj::Or)) {
        res.insert("or");
    }
    let units = || conds.iter().flat_map(|c| c.units.iter());
    if units().any(|u| u.not) {
        res.insert("not");
    }
    if units().any(|u| u.op == CmpOp::In.reference_index()) {
        res.insert("in");
    }
    if units().any(|u| u.op == CmpOp::Like.reference_index()) {
        res.insert("like");
    }
    res
}

fn bare_column(id: &str) -> &str {
    id.split_once('.').map_or(id, |(_, c)| c)
}

fn nested_match(pred: &Option<Box<OSql>>, gold: &Option<Box<OSql>>) -> bool {
    match (pred, gold) {
        (None, None) => true,
        (Some(p), Some(g)) => em_prepared(p, g),
        _ => false,
    }
}

fn em_prepared(p: &OSql, g: &OSql) -> bool {
    let sel_ok = same_multiset(&p.select, &g.select);

    let where_ok = same_multiset(&p.where_.units, &g.where_.units);

    let pg: Vec<&str> = p.group_by.iter().map(|c| bare_column(&c.id)).collect();
    let gg: Vec<&str> = g.group_by.iter().map(|c| bare_column(&c.id)).collect();
    let group_ok = same_multiset(&pg, &gg);

    let having_ok = match (p.group_by.is_empty(), g.group_by.is_empty()) {
        (true, true) => true,
        (false, false) => {
            let ids = |q: &OSql| q.group_by.iter().map(|c| c.id.clone()).collect::<Vec<_>>();
            ids(p) == ids(g) && p.having == g.having
        }
        _ => false,
    };

    let order_ok = match (&p.order_by, &g.order_by) {
        (None, None) => true,
        (Some(a), Some(b)) => a == b && p.limit.is_some() == g.limit.is_some(),
        _ => false,
    };

    let conj_set = |c: &OCond| c.conjs.iter().map(|x| *x == Conj::Or).collect::<BTreeSet<_>>();
    let and_or_ok = conj_set(&p.where_) == conj_set(&g.where_);

    let iuen_ok = nested_match(&p.intersect, &g.intersect)
        && nested_match(&p.except, &g.except)
        && nested_match(&p.union, &g.union);

    let kw_ok = keywords(p) == keywords(g);

    if !(sel_ok && where_ok && group_ok && having_ok && order_ok && and_or_ok && iuen_ok && kw_ok) {
        return false;
    }
    g.tables.is_empty() || same_multiset(&p.tables, &g.tables)
}

/// Clause-by-clause set comparison with condition values ignored.
pub fn exact_set_match(pred: &SqlAst, gold: &SqlAst, schema: &DatabaseSchema) -> bool {
    let kmap = foreign_key_map(schema);
    em_prepared(&prepare(pred, &kmap), &prepare(gold, &kmap))
}

fn cond_conjs(q: &SqlAst) -> impl Iterator<Item = &Conj> {
    [q.from.conds.as_ref(), q.where_.as_ref(), q.having.as_ref()].into_iter().flatten().flat_map(|c| c.conjs.iter())
}

fn cond_units(q: &SqlAst) -> impl Iterator<Item = &crate::sql::CondUnit> {
    [q.from.conds.as_ref(), q.where_.as_ref(), q.having.as_ref()].into_iter().flatten().flat_map(|c| c.units.iter())
}

fn component1(q: &SqlAst) -> usize {
    let mut n = 0;
    n += q.where_.is_some() as usize;
    n += !q.group_by.is_empty() as usize;
    n += q.order_by.is_some() as usize;
    n += q.limit.is_some() as usize;
    n += q.from.tables.len().saturating_sub(1);
    n += cond_conjs(q).filter(|c| **c == Conj::Or).count();
    n += cond_units(q).filter(|u| u.op == CmpOp::Like).count();
    n
}

fn component2(q: &SqlAst) -> usize {
    let nested = cond_units(q)
        .flat_map(|u| std::iter::once(&u.value).chain(u.value2.as_ref()))
        .filter(|v| matches!(v, Value::Subquery(_)))
        .count();
    nested + q.set_op.is_some() as usize
}

fn others(q: &SqlAst) -> usize {
    let mut agg = 0;
    agg += q.select.items.iter().filter(|i| i.agg != AggOp::None).count();
    // The reference scorer reads the NOT flag of WHERE units and both the NOT
    // flag and the connectors of HAVING as aggregate markers.
    if let Some(w) = &q.where_ {
        agg += w.units.iter().filter(|u| u.not).count();
    }
    agg += q.group_by.iter().filter(|c| c.agg != AggOp::None).count();
    if let Some(o) = &q.order_by {
        for v in &o.items {
            agg += (v.left.agg != AggOp::None) as usize;
            agg += v.right.as_ref().is_some_and(|r| r.agg != AggOp::None) as usize;
        }
    }
    if let Some(h) = &q.having {
        agg += h.units.iter().filter(|u| u.not).count() + h.conjs.len();
    }
    let mut n = 0;
    n += (agg > 1) as usize;
    n += (q.select.items.len() > 1) as usize;
    n += q.where_.as_ref().is_some_and(|w| w.units.len() > 1) as usize;
    n += (q.group_by.len() > 1) as usize;
    n
}

/// Difficulty of a gold query by the reference component-counting rules.
pub fn hardness(gold: &SqlAst) -> Hardness {
    let c1 = component1(gold);
    let c2 = component2(gold);
    let o = others(gold);
    if c1 <= 1 && o == 0 && c2 == 0 {
        Hardness::Easy
    } else if (o <= 2 && c1 <= 1 && c2 == 0) || (c1 <= 2 && o < 2 && c2 == 0) {
        Hardness::Medium
    } else if (o > 2 && c1 <= 2 && c2 == 0)
        || (2 < c1 && c1 <= 3 && o <= 2 && c2 == 0)
        || (c1 <= 1 && o == 0 && c2 <= 1)
    {
        Hardness::Hard
    } else {
        Hardness::Extra
    }
}
