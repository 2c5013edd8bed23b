//! Recursive-descent parser for the Spider SQL subset.
//!
//! The parser is LL with at most two tokens of lookahead and never
//! backtracks, so running out of input ([`Fail::Eof`]) means everything read
//! so far is a viable prefix. The prefix checker relies on this and on the
//! optional [`ScopeLog`] the parser fills while it goes.

use super::ast::*;
use super::lexer::{is_reserved, Sym, Tok, Token};
use super::SqlError;

#[derive(Debug)]
pub(crate) enum Fail {
    /// Input ended where more tokens were required.
    Eof,
    Err { offset: usize, message: String },
}

type PResult<T> = Result<T, Fail>;

/// Per-query record of what the parser has seen, used to decide schema
/// feasibility of a truncated statement.
#[derive(Debug, Default)]
pub(crate) struct ScopeLog {
    pub scopes: Vec<ScopeRec>,
}

#[derive(Debug)]
pub(crate) struct ScopeRec {
    pub parent: Option<usize>,
    pub tables: Vec<ScopeTable>,
    /// Tables can still be added to this query's FROM.
    pub from_open: bool,
    pub refs: Vec<PendingRef>,
}

#[derive(Debug)]
pub(crate) enum ScopeTable {
    Named { name: String, alias: Option<String> },
    Derived { alias: Option<String> },
}

#[derive(Debug)]
pub(crate) struct PendingRef {
    pub qualifier: Option<String>,
    /// `None` for `*`.
    pub column: Option<String>,
    /// The word is the last token of the input and could still turn into a
    /// qualifier (`word . column`).
    pub at_end: bool,
}

pub(crate) struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    src_len: usize,
    log: Option<ScopeLog>,
    scope_stack: Vec<usize>,
}

pub(crate) fn parse_tokens(toks: &[Token], src_len: usize) -> Result<SqlAst, SqlError> {
    let mut p = Parser::new(toks, src_len, false);
    match p.parse_statement() {
        Ok(ast) => Ok(ast),
        Err(Fail::Eof) => {
            Err(SqlError::Parse { offset: src_len, message: "unexpected end of input".into() })
        }
        Err(Fail::Err { offset, message }) => Err(SqlError::Parse { offset, message }),
    }
}

/// Outcome of parsing a truncated statement.
pub(crate) enum PrefixParse {
    /// Tokens form a complete statement.
    Complete(ScopeLog),
    /// Tokens are a proper viable prefix.
    Incomplete(ScopeLog),
    Dead,
}

pub(crate) fn parse_prefix(toks: &[Token], src_len: usize) -> PrefixParse {
    let mut p = Parser::new(toks, src_len, true);
    let res = p.parse_statement();
    let log = p.log.take().unwrap_or_default();
    match res {
        Ok(_) => PrefixParse::Complete(log),
        Err(Fail::Eof) => PrefixParse::Incomplete(log),
        Err(Fail::Err { .. }) => PrefixParse::Dead,
    }
}

impl<'a> Parser<'a> {
    fn new(toks: &'a [Token], src_len: usize, track: bool) -> Self {
        Parser {
            toks,
            pos: 0,
            src_len,
            log: track.then(ScopeLog::default),
            scope_stack: Vec::new(),
        }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, n: usize) -> Option<&'a Tok> {
        self.toks.get(self.pos + n).map(|t| &t.tok)
    }

    /// Current token starts exactly where the previous one ended.
    fn touches_previous(&self) -> bool {
        match (self.toks.get(self.pos.wrapping_sub(1)), self.toks.get(self.pos)) {
            (Some(a), Some(b)) => a.end == b.start,
            _ => false,
        }
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.src_len, |t| t.start)
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        if self.pos >= self.toks.len() {
            return Err(Fail::Eof);
        }
        Err(Fail::Err { offset: self.offset(), message: message.into() })
    }

    fn is_word(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w == kw)
    }

    fn is_sym(&self, s: Sym) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn eat_word(&mut self, kw: &str) -> bool {
        if self.is_word(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, s: Sym) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, kw: &str) -> PResult<()> {
        if self.eat_word(kw) {
            Ok(())
        } else {
            self.err(format!("expected `{}`", kw.to_uppercase()))
        }
    }

    fn expect_sym(&mut self, s: Sym, what: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{what}`"))
        }
    }

    /// A non-reserved word usable as a name.
    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(Tok::Word(w)) if !is_reserved(w) => {
                self.pos += 1;
                Ok(w.clone())
            }
            Some(Tok::QuotedIdent(w)) => {
                self.pos += 1;
                Ok(w.clone())
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn tracking(&self) -> bool {
        self.log.is_some()
    }

    fn current_scope(&mut self) -> Option<&mut ScopeRec> {
        let idx = *self.scope_stack.last()?;
        self.log.as_mut().map(|l| &mut l.scopes[idx])
    }

    fn open_scope(&mut self) {
        if let Some(log) = self.log.as_mut() {
            let parent = self.scope_stack.last().copied();
            log.scopes.push(ScopeRec {
                parent,
                tables: Vec::new(),
                from_open: true,
                refs: Vec::new(),
            });
            self.scope_stack.push(log.scopes.len() - 1);
        }
    }

    fn close_scope(&mut self) {
        if self.tracking() {
            self.scope_stack.pop();
        }
    }

    fn parse_statement(&mut self) -> PResult<SqlAst> {
        let ast = self.parse_query()?;
        while self.eat_sym(Sym::Semi) {}
        if self.pos < self.toks.len() {
            return self.err("unexpected trailing input");
        }
        Ok(ast)
    }

    /// `select_core [set_op query]`, optionally wrapped in parentheses.
    fn parse_query(&mut self) -> PResult<SqlAst> {
        if self.is_sym(Sym::LParen) {
            self.pos += 1;
            let inner = self.parse_query()?;
            self.expect_sym(Sym::RParen, ")")?;
            return Ok(inner);
        }
        self.open_scope();
        let core = self.parse_select_core();
        self.close_scope();
        let mut core = core?;
        let kind = match self.peek() {
            Some(Tok::Word(w)) if w == "union" => Some(SetOpKind::Union),
            Some(Tok::Word(w)) if w == "intersect" => Some(SetOpKind::Intersect),
            Some(Tok::Word(w)) if w == "except" => Some(SetOpKind::Except),
            _ => None,
        };
        if let Some(kind) = kind {
            self.pos += 1;
            let rhs = self.parse_query()?;
            core.set_op = Some((kind, Box::new(rhs)));
        }
        Ok(core)
    }

    fn parse_select_core(&mut self) -> PResult<SqlAst> {
        self.expect_word("select")?;
        let distinct = self.eat_word("distinct");
        let mut items = vec![self.parse_select_item()?];
        while self.eat_sym(Sym::Comma) {
            items.push(self.parse_select_item()?);
        }
        self.expect_word("from")?;
        let from = self.parse_from()?;

        let where_ = if self.eat_word("where") { Some(self.parse_condition()?) } else { None };

        let mut group_by = Vec::new();
        if self.eat_word("group") {
            self.expect_word("by")?;
            group_by.push(self.parse_col_unit()?);
            while self.eat_sym(Sym::Comma) {
                group_by.push(self.parse_col_unit()?);
            }
        }
        let having = if self.eat_word("having") { Some(self.parse_condition()?) } else { None };

        let order_by = if self.eat_word("order") {
            self.expect_word("by")?;
            let mut items = Vec::new();
            let mut direction = Direction::Asc;
            loop {
                items.push(self.parse_val_unit()?);
                if self.eat_word("asc") {
                    direction = Direction::Asc;
                } else if self.eat_word("desc") {
                    direction = Direction::Desc;
                }
                if !self.eat_sym(Sym::Comma) {
                    break;
                }
            }
            Some(OrderBy { items, direction })
        } else {
            None
        };

        let limit = if self.eat_word("limit") {
            match self.peek() {
                Some(Tok::Number(n)) => match n.parse::<u64>() {
                    Ok(v) => {
                        self.pos += 1;
                        Some(v)
                    }
                    Err(_) => return self.err("LIMIT expects a non-negative integer"),
                },
                _ => return self.err("LIMIT expects a non-negative integer"),
            }
        } else {
            None
        };

        Ok(SqlAst {
            select: Select { distinct, items },
            from,
            where_,
            group_by,
            having,
            order_by,
            limit,
            set_op: None,
        })
    }

    fn parse_select_item(&mut self) -> PResult<SelectItem> {
        if let Some(Tok::Word(w)) = self.peek() {
            if let Some(agg) = AggOp::from_word(w) {
                match self.peek_at(1) {
                    Some(Tok::Sym(Sym::LParen)) => {
                        self.pos += 1;
                        let val = self.parse_val_unit()?;
                        return Ok(SelectItem { agg, val });
                    }
                    None if self.tracking() => return Err(Fail::Eof),
                    _ => {}
                }
            }
        }
        Ok(SelectItem { agg: AggOp::None, val: self.parse_val_unit()? })
    }

    /// `( col_unit [op col_unit] )` or `col_unit [op col_unit]`.
    fn parse_val_unit(&mut self) -> PResult<ValUnit> {
        let block = self.eat_sym(Sym::LParen);
        let left = self.parse_col_unit()?;
        let op = match self.peek() {
            Some(Tok::Sym(Sym::Minus)) => UnitOp::Minus,
            Some(Tok::Sym(Sym::Plus)) => UnitOp::Plus,
            Some(Tok::Sym(Sym::Star)) => UnitOp::Times,
            Some(Tok::Sym(Sym::Slash)) => UnitOp::Divide,
            _ => UnitOp::None,
        };
        let right = if op != UnitOp::None {
            self.pos += 1;
            Some(self.parse_col_unit()?)
        } else {
            None
        };
        if block {
            self.expect_sym(Sym::RParen, ")")?;
        }
        Ok(ValUnit { op, left, right })
    }

    /// `agg ( [DISTINCT] column )` or `[DISTINCT] column`.
    fn parse_col_unit(&mut self) -> PResult<ColUnit> {
        if let Some(Tok::Word(w)) = self.peek() {
            if let Some(agg) = AggOp::from_word(w) {
                match self.peek_at(1) {
                    Some(Tok::Sym(Sym::LParen)) => {
                        self.pos += 2;
                        let distinct = self.eat_word("distinct");
                        let col = self.parse_column()?;
                        self.expect_sym(Sym::RParen, ")")?;
                        return Ok(ColUnit { agg, col, distinct });
                    }
                    None if self.tracking() => return Err(Fail::Eof),
                    _ => {}
                }
            }
        }
        let distinct = self.eat_word("distinct");
        let col = self.parse_column()?;
        Ok(ColUnit { agg: AggOp::None, col, distinct })
    }

    /// `*`, `name`, `qualifier.name` or `qualifier.*`.
    fn parse_column(&mut self) -> PResult<ColumnRef> {
        if self.eat_sym(Sym::Star) {
            self.record_ref(None, None, false);
            return Ok(ColumnRef::Star { qualifier: None });
        }
        let first = self.ident("column name")?;
        if self.is_sym(Sym::Dot) && self.touches_previous() {
            self.pos += 1;
            if self.pos < self.toks.len() && !self.touches_previous() {
                return self.err("qualified name must not contain spaces");
            }
            if self.eat_sym(Sym::Star) {
                self.record_ref(Some(first.clone()), None, false);
                return Ok(ColumnRef::Star { qualifier: Some(first) });
            }
            let column = self.ident("column name")?;
            self.record_ref(Some(first.clone()), Some(column.clone()), false);
            return Ok(ColumnRef::Column { table: String::new(), column, qualifier: Some(first) });
        }
        let at_end = self.pos >= self.toks.len() && self.toks[self.pos - 1].end == self.src_len;
        self.record_ref(None, Some(first.clone()), at_end);
        Ok(ColumnRef::Column { table: String::new(), column: first, qualifier: None })
    }

    fn record_ref(&mut self, qualifier: Option<String>, column: Option<String>, at_end: bool) {
        if let Some(scope) = self.current_scope() {
            scope.refs.push(PendingRef { qualifier, column, at_end });
        }
    }

    fn parse_from(&mut self) -> PResult<From> {
        let mut tables = vec![self.parse_table_unit()?];
        let mut conds: Option<Condition> = None;
        loop {
            if self.eat_word("on") {
                let c = self.parse_condition()?;
                conds = Some(match conds.take() {
                    None => c,
                    Some(mut prev) => {
                        prev.conjs.push(Conj::And);
                        prev.units.extend(c.units);
                        prev.conjs.extend(c.conjs);
                        prev
                    }
                });
                continue;
            }
            if self.eat_word("join") {
                tables.push(self.parse_table_unit()?);
                continue;
            }
            break;
        }
        if self.pos < self.toks.len() {
            if let Some(scope) = self.current_scope() {
                scope.from_open = false;
            }
        }
        Ok(From { tables, conds })
    }

    fn parse_table_unit(&mut self) -> PResult<TableUnit> {
        if self.is_sym(Sym::LParen) {
            self.pos += 1;
            // A derived table cannot see the query it sits in.
            let enclosing = if self.tracking() { self.scope_stack.pop() } else { None };
            let query = self.parse_query();
            if let Some(idx) = enclosing {
                self.scope_stack.push(idx);
            }
            let query = query?;
            self.expect_sym(Sym::RParen, ")")?;
            let alias = self.parse_alias()?;
            if let Some(scope) = self.current_scope() {
                scope.tables.push(ScopeTable::Derived { alias: alias.clone() });
            }
            return Ok(TableUnit::Subquery { query: Box::new(query), alias });
        }
        let name = self.ident("table name")?;
        if let Some(scope) = self.current_scope() {
            scope.tables.push(ScopeTable::Named { name: name.clone(), alias: None });
        }
        let alias = self.parse_alias()?;
        if let (Some(a), Some(scope)) = (alias.clone(), self.current_scope()) {
            if let Some(ScopeTable::Named { alias, .. }) = scope.tables.last_mut() {
                *alias = Some(a);
            }
        }
        Ok(TableUnit::Table { name, alias })
    }

    fn parse_alias(&mut self) -> PResult<Option<String>> {
        if self.eat_word("as") {
            Ok(Some(self.ident("alias")?))
        } else {
            Ok(None)
        }
    }

    fn parse_condition(&mut self) -> PResult<Condition> {
        let mut units = vec![self.parse_cond_unit()?];
        let mut conjs = Vec::new();
        loop {
            let conj = if self.eat_word("and") {
                Conj::And
            } else if self.eat_word("or") {
                Conj::Or
            } else {
                break;
            };
            conjs.push(conj);
            units.push(self.parse_cond_unit()?);
        }
        Ok(Condition { units, conjs })
    }

    fn parse_cond_unit(&mut self) -> PResult<CondUnit> {
        let val = self.parse_val_unit()?;
        let mut not = self.eat_word("not");
        let op = match self.peek() {
            Some(Tok::Sym(Sym::Eq)) => CmpOp::Eq,
            Some(Tok::Sym(Sym::Ne)) => CmpOp::Ne,
            Some(Tok::Sym(Sym::Lt)) => CmpOp::Lt,
            Some(Tok::Sym(Sym::Gt)) => CmpOp::Gt,
            Some(Tok::Sym(Sym::Le)) => CmpOp::Le,
            Some(Tok::Sym(Sym::Ge)) => CmpOp::Ge,
            Some(Tok::Word(w)) if w == "between" => CmpOp::Between,
            Some(Tok::Word(w)) if w == "in" => CmpOp::In,
            Some(Tok::Word(w)) if w == "like" => CmpOp::Like,
            Some(Tok::Word(w)) if w == "is" && !not => CmpOp::Is,
            _ => return self.err("expected comparison operator"),
        };
        if not && !matches!(op, CmpOp::Between | CmpOp::In | CmpOp::Like) {
            return self.err("NOT must precede BETWEEN, IN or LIKE");
        }
        self.pos += 1;
        if op == CmpOp::Is {
            not = self.eat_word("not");
            self.expect_word("null")?;
            return Ok(CondUnit { not, op, val, value: Value::Null, value2: None });
        }
        let value = self.parse_value(op == CmpOp::In)?;
        let value2 = if op == CmpOp::Between {
            self.expect_word("and")?;
            Some(self.parse_value(false)?)
        } else {
            None
        };
        Ok(CondUnit { not, op, val, value, value2 })
    }

    fn parse_value(&mut self, subquery_only: bool) -> PResult<Value> {
        if self.is_sym(Sym::LParen) {
            if matches!(self.peek_at(1), Some(Tok::Word(w)) if w == "select")
                || matches!(self.peek_at(1), Some(Tok::Sym(Sym::LParen)))
            {
                self.pos += 1;
                let q = self.parse_query()?;
                self.expect_sym(Sym::RParen, ")")?;
                return Ok(Value::Subquery(Box::new(q)));
            }
            if self.peek_at(1).is_none() {
                return Err(Fail::Eof);
            }
        }
        if subquery_only {
            return self.err("IN expects a subquery");
        }
        match self.peek() {
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Value::Text(s.clone()))
            }
            Some(Tok::Number(n)) => {
                self.pos += 1;
                Ok(Value::Number(n.clone()))
            }
            Some(Tok::Sym(Sym::Minus)) => match self.peek_at(1) {
                Some(Tok::Number(n)) => {
                    self.pos += 2;
                    Ok(Value::Number(format!("-{n}")))
                }
                None => Err(Fail::Eof),
                _ => self.err("expected number after `-`"),
            },
            Some(Tok::Word(w)) if w == "null" => {
                self.pos += 1;
                Ok(Value::Null)
            }
            None => Err(Fail::Eof),
            _ => Ok(Value::Column(self.parse_col_unit()?)),
        }
    }
}
