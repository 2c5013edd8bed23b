//! Viability of truncated statements, for pruning decoder prefixes.

use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{tokenize_prefix, Tail, Tok, Token, RESERVED};
use super::parser::{parse_prefix, PendingRef, PrefixParse, ScopeLog, ScopeTable};
use crate::schema::DatabaseSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefixMode {
    /// The text lexes.
    Lexical,
    /// Some suffix makes it a statement of the grammar.
    Grammatical,
    /// Some suffix makes it a statement that also binds against the schema.
    SchemaBound,
}

const AGGREGATES: &[&str] = &["max", "min", "count", "sum", "avg"];

pub fn prefix_feasible(prefix: &str, schema: &DatabaseSchema, mode: PrefixMode) -> bool {
    let Ok((toks, tail)) = tokenize_prefix(prefix) else {
        return false;
    };
    if mode == PrefixMode::Lexical {
        return true;
    }
    let bound = mode == PrefixMode::SchemaBound;
    candidates(toks, tail, prefix.len(), bound.then_some(schema)).into_iter().any(|cand| {
        match parse_prefix(&cand, prefix.len()) {
            PrefixParse::Dead => false,
            PrefixParse::Complete(log) | PrefixParse::Incomplete(log) => {
                !bound || log_binds(&log, schema)
            }
        }
    })
}

fn schema_names(schema: &DatabaseSchema) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for t in &schema.tables {
        out.insert(t.name.to_lowercase());
        for c in &t.columns {
            out.insert(c.name.to_lowercase());
        }
    }
    out
}

/// Token lists standing for every way the last token can still grow.
fn candidates(
    toks: Vec<Token>,
    tail: Tail,
    src_len: usize,
    schema: Option<&DatabaseSchema>,
) -> Vec<Vec<Token>> {
    let Some(last) = toks.last().cloned() else {
        return vec![toks];
    };
    let with_last = |tok: Tok| {
        let mut v = toks.clone();
        *v.last_mut().unwrap() = Token { tok, start: last.start, end: src_len };
        v
    };
    let names: Vec<String> = match schema {
        Some(s) => schema_names(s).into_iter().collect(),
        None => Vec::new(),
    };
    let mut out = vec![toks.clone()];
    match (tail, &last.tok) {
        (Tail::PartialWord, Tok::Word(w)) | (Tail::PartialNumber, Tok::Number(w)) => {
            let longer = RESERVED
                .iter()
                .chain(AGGREGATES)
                .map(|k| k.to_string())
                .chain(names)
                .filter(|k| k.starts_with(w.as_str()) && k != w);
            for k in longer {
                out.push(with_last(Tok::Word(k)));
            }
            out.push(with_last(Tok::Word(format!("{w}_"))));
        }
        (Tail::OpenString, Tok::QuotedIdent(w)) => {
            for k in names.into_iter().filter(|k| k.starts_with(w.as_str()) && k != w) {
                out.push(with_last(Tok::QuotedIdent(k)));
            }
        }
        (Tail::TrailingDot, _) => out.push(with_last(Tok::Number(".0".into()))),
        _ => {}
    }
    out
}

/// Scope ids from `scope` outward, in lookup order.
fn chain(log: &ScopeLog, scope: usize) -> Vec<usize> {
    let mut out = vec![scope];
    let mut cur = scope;
    while let Some(p) = log.scopes[cur].parent {
        out.push(p);
        cur = p;
    }
    out
}

enum Hit<'l> {
    Named { name: &'l str, by_alias: bool },
    Derived,
}

fn lookup<'l>(log: &'l ScopeLog, scope: usize, q: &str) -> Option<Hit<'l>> {
    let tables = &log.scopes[scope].tables;
    for t in tables {
        match t {
            ScopeTable::Named { name, alias: Some(a) } if a == q => {
                return Some(Hit::Named { name, by_alias: true })
            }
            ScopeTable::Derived { alias: Some(a) } if a == q => return Some(Hit::Derived),
            _ => {}
        }
    }
    tables.iter().find_map(|t| match t {
        ScopeTable::Named { name, .. } if name == q => Some(Hit::Named { name, by_alias: false }),
        _ => None,
    })
}

/// One `qualifier.column` (or `qualifier.*` when `column` is `None`) use.
struct QualUse<'l> {
    /// Scopes where adding `... JOIN t AS qualifier` would capture this use,
    /// innermost first.
    add_points: Vec<usize>,
    existing: Option<Hit<'l>>,
    column: Option<&'l str>,
}

fn resolves(schema: &DatabaseSchema, hit: &Hit, column: Option<&str>) -> bool {
    match (hit, column) {
        (Hit::Named { name, .. }, Some(c)) => schema.column_in_table(name, c).is_some(),
        (Hit::Named { .. }, None) | (Hit::Derived, None) => true,
        (Hit::Derived, Some(_)) => false,
    }
}

/// Whether every table and column recorded so far can be made to bind.
///
/// Missing qualifiers are introduced at the innermost open FROM that sees
/// them. This is a witness construction, so success is exact; failure can be
/// spurious only when a fresh alias would shadow a same-named alias further
/// out.
fn log_binds(log: &ScopeLog, schema: &DatabaseSchema) -> bool {
    let mut quals: BTreeMap<&str, Vec<QualUse>> = BTreeMap::new();
    for (id, scope) in log.scopes.iter().enumerate() {
        for t in &scope.tables {
            if let ScopeTable::Named { name, .. } = t {
                if schema.table_by_name(name).is_none() {
                    return false;
                }
            }
        }
        let ch = chain(log, id);
        let any_open = ch.iter().any(|&s| log.scopes[s].from_open);
        for r in &scope.refs {
            let PendingRef { qualifier, column, at_end } = r;
            let (q, col) = match (qualifier.as_deref(), column.as_deref()) {
                (None, None) => continue,
                (None, Some(c)) => {
                    let bound = ch.iter().any(|&s| {
                        log.scopes[s].tables.iter().any(|t| {
                            matches!(t, ScopeTable::Named { name, .. }
                                if schema.column_in_table(name, c).is_some())
                        })
                    });
                    if bound || (any_open && schema.has_column_anywhere(c)) {
                        continue;
                    }
                    if !at_end {
                        return false;
                    }
                    (c, None)
                }
                (Some(q), c) => (q, c),
            };
            let mut add_points = Vec::new();
            let mut existing = None;
            for &s in &ch {
                let hit = lookup(log, s, q);
                let open = log.scopes[s].from_open;
                if open && !matches!(hit, Some(Hit::Named { by_alias: true, .. }) | Some(Hit::Derived)) {
                    add_points.push(s);
                }
                if hit.is_some() {
                    existing = hit;
                    break;
                }
            }
            quals.entry(q).or_default().push(QualUse { add_points, existing, column: col });
        }
    }

    for uses in quals.values() {
        let mut chosen: BTreeSet<usize> = BTreeSet::new();
        for u in uses {
            let ok = u.existing.as_ref().is_some_and(|h| resolves(schema, h, u.column));
            if !ok {
                match u.add_points.first() {
                    Some(&p) => {
                        chosen.insert(p);
                    }
                    None => return false,
                }
            }
        }
        let mut needs: BTreeMap<usize, BTreeSet<&str>> = BTreeMap::new();
        for u in uses {
            match u.add_points.iter().find(|p| chosen.contains(p)) {
                Some(&p) => {
                    let entry = needs.entry(p).or_default();
                    if let Some(c) = u.column {
                        entry.insert(c);
                    }
                }
                None => {
                    if !u.existing.as_ref().is_some_and(|h| resolves(schema, h, u.column)) {
                        return false;
                    }
                }
            }
        }
        for cols in needs.values() {
            let fits = schema
                .tables
                .iter()
                .any(|t| cols.iter().all(|c| schema.column_in_table(&t.name, c).is_some()));
            if !fits {
                return false;
            }
        }
    }
    true
}
