//! Canonical form used for comparison and round-trip checks.

use super::ast::*;
use super::render::{col_unit_key, cond_unit_key};

/// Erases aliases and qualifiers, lowercases string literals and puts
/// commutative operands and same-connector condition lists in a fixed order.
pub fn normalize(ast: &SqlAst) -> SqlAst {
    let mut out = ast.clone();
    query(&mut out);
    out
}

/// True when some (sub)query has HAVING with neither GROUP BY nor an
/// aggregate in its select list. The parser accepts such queries.
pub fn having_without_grouping(ast: &SqlAst) -> bool {
    let mut found = false;
    ast.walk(&mut |q| {
        if q.having.is_some() && q.group_by.is_empty() && !q.has_aggregate() {
            found = true;
        }
    });
    found
}

fn query(q: &mut SqlAst) {
    for t in q.from.tables.iter_mut() {
        match t {
            TableUnit::Table { alias, .. } => *alias = None,
            TableUnit::Subquery { query: sub, alias } => {
                query(sub);
                *alias = None;
            }
        }
    }
    for item in q.select.items.iter_mut() {
        val_unit(&mut item.val);
    }
    for c in [q.from.conds.as_mut(), q.where_.as_mut(), q.having.as_mut()].into_iter().flatten() {
        condition(c);
    }
    for c in q.group_by.iter_mut() {
        col_unit(c);
    }
    if let Some(ob) = q.order_by.as_mut() {
        for v in ob.items.iter_mut() {
            val_unit(v);
        }
    }
    if let Some((_, rhs)) = q.set_op.as_mut() {
        query(rhs);
    }
}

fn col_unit(c: &mut ColUnit) {
    match &mut c.col {
        ColumnRef::Star { qualifier } | ColumnRef::Column { qualifier, .. } => *qualifier = None,
    }
}

fn val_unit(v: &mut ValUnit) {
    col_unit(&mut v.left);
    if let Some(r) = v.right.as_mut() {
        col_unit(r);
        if v.op.is_commutative() && col_unit_key(r) < col_unit_key(&v.left) {
            std::mem::swap(&mut v.left, r);
        }
    }
}

fn value(v: &mut Value) {
    match v {
        Value::Text(t) => *t = t.to_lowercase(),
        Value::Column(c) => col_unit(c),
        Value::Subquery(q) => query(q),
        Value::Number(_) | Value::Null => {}
    }
}

fn condition(c: &mut Condition) {
    for u in c.units.iter_mut() {
        val_unit(&mut u.val);
        value(&mut u.value);
        if let Some(v2) = u.value2.as_mut() {
            value(v2);
        }
        if matches!(u.op, CmpOp::Eq | CmpOp::Ne) && u.val.right.is_none() {
            if let Value::Column(rhs) = &mut u.value {
                if col_unit_key(rhs) < col_unit_key(&u.val.left) {
                    std::mem::swap(&mut u.val.left, rhs);
                }
            }
        }
    }
    if !c.conjs.is_empty() && c.conjs.iter().all(|x| *x == c.conjs[0]) {
        c.units.sort_by_cached_key(cond_unit_key);
    }
}
