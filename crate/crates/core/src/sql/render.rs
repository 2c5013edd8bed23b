//! Turns an AST back into text.

use std::fmt::Write;

use super::ast::*;
use super::lexer::is_reserved;

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    /// Executable SQL.
    Sql,
    /// Every column written as `table.column`; used as a sort key.
    Key,
    /// Names and literals replaced by `TAB`, `COL` and `VAL`.
    Template,
}

/// Executable SQL for `ast`. Keywords are upper case, names lower case.
pub fn render(ast: &SqlAst) -> String {
    render_with(ast, Mode::Sql)
}

pub(crate) fn render_with(ast: &SqlAst, mode: Mode) -> String {
    let mut r = Renderer { mode, scopes: Vec::new(), out: String::new() };
    r.query(ast);
    r.out
}

/// Sort key of one condition unit.
pub(crate) fn cond_unit_key(unit: &CondUnit) -> String {
    let mut r = Renderer { mode: Mode::Key, scopes: Vec::new(), out: String::new() };
    r.cond_unit(unit);
    r.out
}

pub(crate) fn col_unit_key(col: &ColUnit) -> String {
    let mut r = Renderer { mode: Mode::Key, scopes: Vec::new(), out: String::new() };
    r.col_unit(col);
    r.out
}

struct Renderer<'a> {
    mode: Mode,
    scopes: Vec<&'a [TableUnit]>,
    out: String,
}

fn ident(name: &str) -> String {
    let plain = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name.chars().all(|c| c.is_alphanumeric() || c == '_')
        && !is_reserved(name);
    if plain {
        name.to_string()
    } else {
        format!("`{}`", name.replace('`', "``"))
    }
}

fn quote(text: &str) -> String {
    format!("'{}'", text.replace('\'', "''"))
}

impl<'a> Renderer<'a> {
    fn push(&mut self, s: &str) {
        self.out.push_str(s);
    }

    fn query(&mut self, q: &'a SqlAst) {
        self.scopes.push(&q.from.tables);
        self.push("SELECT ");
        if q.select.distinct {
            self.push("DISTINCT ");
        }
        for (i, item) in q.select.items.iter().enumerate() {
            if i > 0 {
                self.push(", ");
            }
            if item.agg == AggOp::None {
                self.val_unit(&item.val);
            } else {
                self.push(item.agg.as_str());
                self.push("(");
                self.val_unit(&item.val);
                self.push(")");
            }
        }
        self.push(" FROM ");
        for (i, t) in q.from.tables.iter().enumerate() {
            if i > 0 {
                self.push(" JOIN ");
            }
            self.table_unit(t);
        }
        if let Some(c) = &q.from.conds {
            self.push(" ON ");
            self.condition(c);
        }
        if let Some(c) = &q.where_ {
            self.push(" WHERE ");
            self.condition(c);
        }
        if !q.group_by.is_empty() {
            self.push(" GROUP BY ");
            for (i, c) in q.group_by.iter().enumerate() {
                if i > 0 {
                    self.push(", ");
                }
                self.col_unit(c);
            }
        }
        if let Some(c) = &q.having {
            self.push(" HAVING ");
            self.condition(c);
        }
        if let Some(ob) = &q.order_by {
            self.push(" ORDER BY ");
            for (i, v) in ob.items.iter().enumerate() {
                if i > 0 {
                    self.push(", ");
                }
                self.val_unit(v);
            }
            if ob.direction == Direction::Desc {
                self.push(" DESC");
            }
        }
        if let Some(n) = q.limit {
            if self.mode == Mode::Template {
                self.push(" LIMIT VAL");
            } else {
                let _ = write!(self.out, " LIMIT {n}");
            }
        }
        self.scopes.pop();
        if let Some((kind, rhs)) = &q.set_op {
            self.push(" ");
            self.push(kind.as_str());
            self.push(" ");
            self.query(rhs);
        }
    }

    fn table_unit(&mut self, t: &'a TableUnit) {
        match t {
            TableUnit::Table { name, alias } => {
                if self.mode == Mode::Template {
                    self.push("TAB");
                    return;
                }
                self.push(&ident(name));
                if let Some(a) = alias {
                    self.push(" AS ");
                    self.push(&ident(a));
                }
            }
            TableUnit::Subquery { query, alias } => {
                self.push("(");
                self.query(query);
                self.push(")");
                if let (Some(a), false) = (alias, self.mode == Mode::Template) {
                    self.push(" AS ");
                    self.push(&ident(a));
                }
            }
        }
    }

    fn condition(&mut self, c: &'a Condition) {
        if self.mode == Mode::Template && !c.conjs.is_empty() && c.conjs.iter().all(|x| *x == c.conjs[0]) {
            let mut parts: Vec<String> = c
                .units
                .iter()
                .map(|u| {
                    let mut r = Renderer { mode: self.mode, scopes: self.scopes.clone(), out: String::new() };
                    r.cond_unit(u);
                    r.out
                })
                .collect();
            parts.sort();
            let sep = if c.conjs[0] == Conj::And { " AND " } else { " OR " };
            self.push(&parts.join(sep));
            return;
        }
        for (i, u) in c.units.iter().enumerate() {
            if i > 0 {
                self.push(match c.conjs[i - 1] {
                    Conj::And => " AND ",
                    Conj::Or => " OR ",
                });
            }
            self.cond_unit(u);
        }
    }

    fn cond_unit(&mut self, u: &'a CondUnit) {
        self.val_unit(&u.val);
        if u.op == CmpOp::Is {
            self.push(if u.not { " IS NOT NULL" } else { " IS NULL" });
            return;
        }
        if u.not {
            self.push(" NOT");
        }
        self.push(" ");
        self.push(u.op.as_str());
        self.push(" ");
        self.value(&u.value);
        if let Some(v2) = &u.value2 {
            self.push(" AND ");
            self.value(v2);
        }
    }

    fn value(&mut self, v: &'a Value) {
        match v {
            Value::Number(_) | Value::Text(_) if self.mode == Mode::Template => self.push("VAL"),
            Value::Number(n) => self.push(n),
            Value::Text(t) => self.push(&quote(t)),
            Value::Column(c) => self.col_unit(c),
            Value::Subquery(q) => {
                self.push("(");
                self.query(q);
                self.push(")");
            }
            Value::Null => self.push("NULL"),
        }
    }

    fn val_unit(&mut self, v: &'a ValUnit) {
        self.col_unit(&v.left);
        if let Some(r) = &v.right {
            self.push(" ");
            self.push(v.op.as_str());
            self.push(" ");
            self.col_unit(r);
        }
    }

    fn col_unit(&mut self, c: &'a ColUnit) {
        if c.agg != AggOp::None {
            self.push(c.agg.as_str());
            self.push("(");
        }
        if c.distinct {
            self.push("DISTINCT ");
        }
        self.column(&c.col);
        if c.agg != AggOp::None {
            self.push(")");
        }
    }

    fn column(&mut self, col: &ColumnRef) {
        match (col, self.mode) {
            (ColumnRef::Star { .. }, Mode::Template) => self.push("*"),
            (ColumnRef::Column { .. }, Mode::Template) => self.push("COL"),
            (ColumnRef::Star { qualifier: Some(q) }, Mode::Sql) => {
                let s = format!("{}.*", ident(q));
                self.push(&s);
            }
            (ColumnRef::Star { .. }, _) => self.push("*"),
            (ColumnRef::Column { table, column, .. }, Mode::Key) => {
                let s = if table.is_empty() {
                    ident(column)
                } else {
                    format!("{}.{}", ident(table), ident(column))
                };
                self.push(&s);
            }
            (ColumnRef::Column { table, column, qualifier }, Mode::Sql) => {
                let s = match qualifier {
                    Some(q) => format!("{}.{}", ident(q), ident(column)),
                    None => match self.display_qualifier(table) {
                        Some(q) => format!("{}.{}", ident(&q), ident(column)),
                        None => ident(column),
                    },
                };
                self.push(&s);
            }
        }
    }

    /// Qualifier needed to refer to `table` unambiguously, if any.
    fn display_qualifier(&self, table: &str) -> Option<String> {
        if table.is_empty() {
            return None;
        }
        let depth = self.scopes.len();
        for (i, scope) in self.scopes.iter().enumerate().rev() {
            let hit = scope.iter().find_map(|t| match t {
                TableUnit::Table { name, alias } if name == table => Some(alias.clone()),
                _ => None,
            });
            if let Some(alias) = hit {
                if i + 1 == depth && scope.len() == 1 {
                    return None;
                }
                return Some(alias.unwrap_or_else(|| table.to_string()));
            }
        }
        Some(table.to_string())
    }
}
