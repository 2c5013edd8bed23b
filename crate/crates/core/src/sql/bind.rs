//! Resolves table names, aliases and column references against a schema.

use super::ast::*;
use super::SqlError;
use crate::schema::DatabaseSchema;

#[derive(Debug)]
struct FrameTable {
    /// Schema table name, `None` for a derived table.
    name: Option<String>,
    alias: Option<String>,
}

type Frame = Vec<FrameTable>;

pub(crate) fn bind(ast: &mut SqlAst, schema: &DatabaseSchema) -> Result<(), SqlError> {
    bind_query(ast, schema, &mut Vec::new())
}

fn bind_query(
    q: &mut SqlAst,
    schema: &DatabaseSchema,
    outer: &mut Vec<Frame>,
) -> Result<(), SqlError> {
    let mut frame = Frame::new();
    for t in q.from.tables.iter_mut() {
        match t {
            TableUnit::Table { name, alias } => {
                let table = schema
                    .table_by_name(name)
                    .ok_or_else(|| SqlError::Bind { ident: name.clone() })?;
                *name = table.name.to_lowercase();
                frame.push(FrameTable { name: Some(name.clone()), alias: alias.clone() });
            }
            TableUnit::Subquery { query, alias } => {
                bind_query(query, schema, outer)?;
                frame.push(FrameTable { name: None, alias: alias.clone() });
            }
        }
    }

    outer.push(frame);
    let res = bind_core(q, schema, outer);
    outer.pop();
    res?;

    if let Some((_, rhs)) = q.set_op.as_mut() {
        bind_query(rhs, schema, outer)?;
    }
    Ok(())
}

fn bind_core(q: &mut SqlAst, schema: &DatabaseSchema, stack: &mut Vec<Frame>) -> Result<(), SqlError> {
    if let Some(c) = q.from.conds.as_mut() {
        bind_condition(c, schema, stack)?;
    }
    for item in q.select.items.iter_mut() {
        bind_val_unit(&mut item.val, schema, stack)?;
    }
    if let Some(c) = q.where_.as_mut() {
        bind_condition(c, schema, stack)?;
    }
    for col in q.group_by.iter_mut() {
        bind_column(&mut col.col, schema, stack)?;
    }
    if let Some(c) = q.having.as_mut() {
        bind_condition(c, schema, stack)?;
    }
    if let Some(ob) = q.order_by.as_mut() {
        for v in ob.items.iter_mut() {
            bind_val_unit(v, schema, stack)?;
        }
    }
    Ok(())
}

fn bind_condition(
    c: &mut Condition,
    schema: &DatabaseSchema,
    stack: &mut Vec<Frame>,
) -> Result<(), SqlError> {
    for unit in c.units.iter_mut() {
        bind_val_unit(&mut unit.val, schema, stack)?;
        for v in std::iter::once(&mut unit.value).chain(unit.value2.as_mut()) {
            match v {
                Value::Column(col) => bind_column(&mut col.col, schema, stack)?,
                Value::Subquery(sub) => bind_query(sub, schema, stack)?,
                _ => {}
            }
        }
    }
    Ok(())
}

fn bind_val_unit(v: &mut ValUnit, schema: &DatabaseSchema, stack: &[Frame]) -> Result<(), SqlError> {
    bind_column(&mut v.left.col, schema, stack)?;
    if let Some(r) = v.right.as_mut() {
        bind_column(&mut r.col, schema, stack)?;
    }
    Ok(())
}

fn frame_lookup<'f>(frame: &'f Frame, qualifier: &str) -> Option<&'f FrameTable> {
    frame
        .iter()
        .find(|t| t.alias.as_deref() == Some(qualifier))
        .or_else(|| frame.iter().find(|t| t.name.as_deref() == Some(qualifier)))
}

fn bind_column(col: &mut ColumnRef, schema: &DatabaseSchema, stack: &[Frame]) -> Result<(), SqlError> {
    match col {
        ColumnRef::Star { qualifier: None } => Ok(()),
        ColumnRef::Star { qualifier: Some(q) } => {
            if stack.iter().rev().any(|f| frame_lookup(f, q).is_some()) {
                Ok(())
            } else {
                Err(SqlError::Bind { ident: q.clone() })
            }
        }
        ColumnRef::Column { table, column, qualifier: Some(q) } => {
            let found = stack.iter().rev().find_map(|f| frame_lookup(f, q));
            let entry = found.ok_or_else(|| SqlError::Bind { ident: q.clone() })?;
            let tname = entry
                .name
                .as_deref()
                .ok_or_else(|| SqlError::Bind { ident: format!("{q}.{column}") })?;
            let c = schema
                .column_in_table(tname, column)
                .ok_or_else(|| SqlError::Bind { ident: format!("{q}.{column}") })?;
            *column = c.name.to_lowercase();
            *table = tname.to_string();
            Ok(())
        }
        ColumnRef::Column { table, column, qualifier: None } => {
            for frame in stack.iter().rev() {
                for t in frame {
                    let Some(tname) = t.name.as_deref() else { continue };
                    if let Some(c) = schema.column_in_table(tname, column) {
                        *column = c.name.to_lowercase();
                        *table = tname.to_string();
                        return Ok(());
                    }
                }
            }
            Err(SqlError::Bind { ident: column.clone() })
        }
    }
}
