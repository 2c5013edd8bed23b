//! Schema-linking heuristic: WHERE-slot grounding against database content,
//! name and value links from the utterance window, and abbreviation rescue
//! on categorical columns.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::schema::{normalize_tokens, CellValue, ContentIndex, DatabaseSchema};
use crate::sql::{CmpOp, ColumnRef, SqlAst, TableUnit, Value};

/// Shortest slot value accepted as a prefix of a cell value.
pub const MIN_PREFIX_CHARS: usize = 3;

/// Longest utterance n-gram tried against cell values.
pub const MAX_VALUE_NGRAM: usize = 8;

const STOPWORDS: &[&str] = &[
    "a", "about", "all", "an", "and", "any", "are", "as", "at", "be", "by", "can", "did", "do", "does", "each",
    "for", "from", "give", "has", "have", "how", "i", "in", "is", "it", "its", "list", "many", "me", "much", "of",
    "on", "or", "show", "that", "the", "their", "them", "there", "these", "they", "this", "those", "to", "was",
    "were", "what", "when", "where", "which", "who", "whose", "with", "you", "your",
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Literal {
    Text { value: String },
    Number { value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotMention {
    /// Empty for `*`.
    pub table: String,
    pub column: String,
    pub op: CmpOp,
    pub not: bool,
    pub value: Literal,
    /// Upper bound of BETWEEN.
    pub value2: Option<Literal>,
}

fn literal(v: &Value) -> Option<Literal> {
    match v {
        Value::Text(t) => Some(Literal::Text { value: t.clone() }),
        Value::Number(n) => Some(Literal::Number { value: n.clone() }),
        _ => None,
    }
}

/// One mention per WHERE comparison against a literal, in every nested query.
pub fn extract_where_slots(ast: &SqlAst) -> Vec<SlotMention> {
    let mut out = Vec::new();
    ast.walk(&mut |q| {
        let Some(w) = &q.where_ else { return };
        for u in &w.units {
            let Some(value) = literal(&u.value) else { continue };
            let (table, column) = match &u.val.left.col {
                ColumnRef::Column { table, column, .. } => (table.clone(), column.clone()),
                ColumnRef::Star { .. } => (String::new(), "*".to_string()),
            };
            out.push(SlotMention {
                table,
                column,
                op: u.op,
                not: u.not,
                value,
                value2: u.value2.as_ref().and_then(literal),
            });
        }
    });
    out
}

/// Schema tables named in any FROM clause of the query, sorted.
pub fn from_tables(ast: &SqlAst) -> Vec<String> {
    let mut set = BTreeSet::new();
    ast.walk(&mut |q| {
        for t in &q.from.tables {
            if let TableUnit::Table { name, .. } = t {
                set.insert(name.clone());
            }
        }
    });
    set.into_iter().collect()
}

/// SQL LIKE with `%` and `_`, ASCII case-insensitive.
pub fn like_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.to_lowercase().chars().collect();
    let t: Vec<char> = text.to_lowercase().chars().collect();
    let (mut pi, mut ti) = (0, 0);
    let (mut star, mut mark) = (None, 0);
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '_' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '%' {
            star = Some(pi);
            pi += 1;
            mark = ti;
        } else if let Some(s) = star {
            pi = s + 1;
            mark += 1;
            ti = mark;
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|c| *c == '%')
}

fn text_grounded(value: &str, like: bool, tables: &[String], index: &ContentIndex) -> bool {
    tables.iter().any(|t| {
        if like {
            index.tables.get(&t.to_lowercase()).is_some_and(|tc| {
                tc.columns.keys().any(|c| index.text_values(t, c).any(|v| like_match(value, v)))
            })
        } else {
            index.table_contains(t, &CellValue::Text(value.to_string()))
        }
    })
}

fn violates(m: &SlotMention, tables: &[String], index: &ContentIndex) -> bool {
    match &m.value {
        Literal::Number { .. } => false,
        Literal::Text { value } => !text_grounded(value, m.op == CmpOp::Like, tables, index),
    }
}

/// Number of text-valued mentions whose value occurs in no column of any of
/// `tables`. Numeric values never violate.
pub fn grounding_violations(mentions: &[SlotMention], tables: &[String], index: &ContentIndex) -> usize {
    mentions.iter().filter(|m| violates(m, tables, index)).count()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemaRef {
    Table { table: String },
    Column { table: String, column: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Exact,
    Partial,
}

/// Token range `[start, end)` in the concatenated window, newest utterance
/// first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NameLink {
    pub span: Span,
    pub target: SchemaRef,
    pub kind: MatchKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ValueLink {
    pub span: Span,
    pub table: String,
    pub column: String,
    pub value: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LinkSet {
    pub name_links: BTreeSet<NameLink>,
    pub value_links: BTreeSet<ValueLink>,
}

fn tokens(text: &str) -> Vec<String> {
    normalize_tokens(text).split(' ').filter(|s| !s.is_empty()).map(str::to_string).collect()
}

fn name_variants(name: &str, display: &str) -> BTreeSet<Vec<String>> {
    [tokens(name), tokens(display)].into_iter().filter(|t| !t.is_empty()).collect()
}

fn is_subsequence(needle: &[String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

fn name_match(gram: &[String], variants: &BTreeSet<Vec<String>>) -> Option<MatchKind> {
    if variants.iter().any(|v| v.as_slice() == gram) {
        return Some(MatchKind::Exact);
    }
    if gram.len() == 1 && STOPWORDS.contains(&gram[0].as_str()) {
        return None;
    }
    variants.iter().any(|v| gram.len() < v.len() && is_subsequence(gram, v)).then_some(MatchKind::Partial)
}

/// Name and value links between the utterance window (newest first) and the
/// schema.
pub fn candidate_links(window: &[&str], schema: &DatabaseSchema, index: Option<&ContentIndex>) -> LinkSet {
    let mut targets: Vec<(SchemaRef, BTreeSet<Vec<String>>)> = Vec::new();
    for t in &schema.tables {
        let tl = t.name.to_lowercase();
        targets.push((SchemaRef::Table { table: tl.clone() }, name_variants(&t.name, &t.display)));
        for c in &t.columns {
            targets.push((
                SchemaRef::Column { table: tl.clone(), column: c.name.to_lowercase() },
                name_variants(&c.name, &c.display),
            ));
        }
    }
    let max_name = targets.iter().flat_map(|(_, v)| v.iter().map(Vec::len)).max().unwrap_or(0);

    let mut out = LinkSet::default();
    let mut offset = 0;
    for utt in window {
        let toks = tokens(utt);
        let mut used = vec![false; toks.len()];
        for n in (1..=max_name.min(toks.len())).rev() {
            for s in 0..=toks.len() - n {
                if used[s..s + n].iter().any(|u| *u) {
                    continue;
                }
                let gram = &toks[s..s + n];
                let span = Span { start: offset + s, end: offset + s + n };
                let mut hit = false;
                for (target, variants) in &targets {
                    if let Some(kind) = name_match(gram, variants) {
                        out.name_links.insert(NameLink { span, target: target.clone(), kind });
                        hit = true;
                    }
                }
                if hit {
                    used[s..s + n].iter_mut().for_each(|u| *u = true);
                }
            }
        }
        if let Some(idx) = index {
            for n in 1..=MAX_VALUE_NGRAM.min(toks.len()) {
                for s in 0..=toks.len() - n {
                    let gram = toks[s..s + n].join(" ");
                    for (key, display) in idx.lookup_tokens(&gram) {
                        out.value_links.insert(ValueLink {
                            span: Span { start: offset + s, end: offset + s + n },
                            table: key.table.clone(),
                            column: key.column.clone(),
                            value: display.clone(),
                        });
                    }
                }
            }
        }
        offset += toks.len();
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinkError {
    #[error("{table}.{column} is not categorical")]
    NonCategoricalColumn { table: String, column: String },
}

fn initials(text: &str) -> Option<String> {
    let words: Vec<&str> = text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).collect();
    (words.len() >= 2).then(|| words.iter().filter_map(|w| w.chars().next()).flat_map(char::to_lowercase).collect())
}

/// Whether `value` is a prefix of at least [`MIN_PREFIX_CHARS`] characters of
/// some cell of a categorical column, or the initials of a multi-word cell.
pub fn abbreviation_match(value: &str, table: &str, column: &str, index: &ContentIndex) -> Result<bool, LinkError> {
    if !index.is_categorical(table, column) {
        return Err(LinkError::NonCategoricalColumn { table: table.to_string(), column: column.to_string() });
    }
    let v = value.trim().to_lowercase();
    if v.is_empty() {
        return Ok(false);
    }
    Ok(index.text_values(table, column).any(|cell| {
        let c = cell.to_lowercase();
        (v.chars().count() >= MIN_PREFIX_CHARS && c.starts_with(&v)) || initials(&c).is_some_and(|i| i == v)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize)]
pub struct SlScore {
    pub violations: usize,
    pub support: usize,
}

fn rescued(m: &SlotMention, links: &LinkSet, index: &ContentIndex) -> bool {
    let Literal::Text { value } = &m.value else { return false };
    if abbreviation_match(value, &m.table, &m.column, index).unwrap_or(false) {
        return true;
    }
    let norm = normalize_tokens(value);
    !norm.is_empty() && links.value_links.iter().any(|l| normalize_tokens(&l.value) == norm)
}

/// Grounding violations left after rescue, and the number of distinct
/// tables, columns and slot values of the hypothesis that the window links
/// to.
pub fn sl_score(hyp: &SqlAst, window: &[&str], schema: &DatabaseSchema, index: &ContentIndex) -> SlScore {
    let links = candidate_links(window, schema, Some(index));
    sl_score_with_links(hyp, &links, index)
}

pub fn sl_score_with_links(hyp: &SqlAst, links: &LinkSet, index: &ContentIndex) -> SlScore {
    let mentions = extract_where_slots(hyp);
    let tables = from_tables(hyp);
    let violations = mentions.iter().filter(|m| violates(m, &tables, index) && !rescued(m, links, index)).count();

    let linked: BTreeSet<&SchemaRef> = links.name_links.iter().map(|l| &l.target).collect();
    let value_cols: BTreeSet<(&str, &str)> =
        links.value_links.iter().map(|l| (l.table.as_str(), l.column.as_str())).collect();
    let values: BTreeSet<String> = links.value_links.iter().map(|l| normalize_tokens(&l.value)).collect();

    let mut support = tables.iter().filter(|t| linked.contains(&SchemaRef::Table { table: (*t).clone() })).count();
    let mut cols = BTreeSet::new();
    hyp.walk(&mut |q| collect_columns(q, &mut cols));
    support += cols
        .iter()
        .filter(|(t, c)| {
            linked.contains(&SchemaRef::Column { table: t.clone(), column: c.clone() })
                || value_cols.contains(&(t.as_str(), c.as_str()))
        })
        .count();
    let slot_values: BTreeSet<String> = mentions
        .iter()
        .filter_map(|m| match &m.value {
            Literal::Text { value } => Some(normalize_tokens(value)),
            Literal::Number { .. } => None,
        })
        .filter(|v| !v.is_empty())
        .collect();
    support += slot_values.iter().filter(|v| values.contains(*v)).count();
    SlScore { violations, support }
}

fn collect_columns(q: &SqlAst, out: &mut BTreeSet<(String, String)>) {
    let mut add = |c: &crate::sql::ColUnit| {
        if let Some((t, col)) = c.col.resolved() {
            out.insert((t.to_string(), col.to_string()));
        }
    };
    for i in &q.select.items {
        add(&i.val.left);
        i.val.right.iter().for_each(&mut add);
    }
    for c in [q.from.conds.as_ref(), q.where_.as_ref(), q.having.as_ref()].into_iter().flatten() {
        for u in &c.units {
            add(&u.val.left);
            u.val.right.iter().for_each(&mut add);
            for v in std::iter::once(&u.value).chain(u.value2.as_ref()) {
                if let Value::Column(c) = v {
                    add(c);
                }
            }
        }
    }
    q.group_by.iter().for_each(&mut add);
    if let Some(o) = &q.order_by {
        for v in &o.items {
            add(&v.left);
            v.right.iter().for_each(&mut add);
        }
    }
}
