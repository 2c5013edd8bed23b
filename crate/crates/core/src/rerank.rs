//! N-best lists: validity filtering, scoring with the SL and QP signals and
//! reranking.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linking::{candidate_links, sl_score_with_links, SlScore};
use crate::query_plan::{extract_query_plan, AgreementRule, QueryPlanProbs};
use crate::schema::{ContentIndex, DatabaseSchema};
use crate::sql::{parse_sql, SqlAst};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    /// 0-based position in the original beam.
    pub rank: usize,
    pub sql: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NBestList {
    pub example_id: String,
    pub hypotheses: Vec<Hypothesis>,
}

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("{example_id}: missing {what} for hypothesis {rank}")]
    MissingScore { example_id: String, rank: usize, what: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads `{example_id, hypotheses: [{rank, sql, score?}]}` lines. Each list
/// must be non-empty with ranks `0..n`; hypotheses are put in rank order.
pub fn parse_nbest(text: &str) -> Result<Vec<NBestList>, RerankError> {
    let mut out: Vec<NBestList> = Vec::new();
    let mut ids = std::collections::BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fmt = |message: String| RerankError::Format { line: line_no, message };
        let mut list: NBestList = serde_json::from_str(line).map_err(|e| fmt(e.to_string()))?;
        if list.hypotheses.is_empty() {
            return Err(fmt(format!("`{}` has no hypotheses", list.example_id)));
        }
        list.hypotheses.sort_by_key(|h| h.rank);
        if list.hypotheses.iter().enumerate().any(|(i, h)| h.rank != i) {
            return Err(fmt(format!("`{}` ranks are not 0..{}", list.example_id, list.hypotheses.len())));
        }
        if !ids.insert(list.example_id.clone()) {
            return Err(fmt(format!("duplicate example id `{}`", list.example_id)));
        }
        out.push(list);
    }
    Ok(out)
}

pub fn load_nbest(path: &std::path::Path) -> Result<Vec<NBestList>, RerankError> {
    parse_nbest(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub list: NBestList,
    /// Every hypothesis failed and the input came back unchanged.
    pub all_invalid: bool,
}

/// Drops hypotheses that do not parse or bind. Never returns an empty list.
pub fn filter_valid(list: &NBestList, schema: &DatabaseSchema) -> Filtered {
    let kept: Vec<Hypothesis> =
        list.hypotheses.iter().filter(|h| parse_sql(&h.sql, schema).is_ok()).cloned().collect();
    if kept.is_empty() {
        log::warn!("{}: no hypothesis binds against {}; keeping all", list.example_id, schema.db_id);
        return Filtered { list: list.clone(), all_invalid: true };
    }
    Filtered { list: NBestList { example_id: list.example_id.clone(), hypotheses: kept }, all_invalid: false }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RerankPolicy {
    /// Fewest violations, then most QP agreement, then most support, then
    /// original rank.
    #[default]
    Lexicographic,
    /// `model_score + alpha * qp - beta * violations + gamma * support`,
    /// highest first, original rank breaking ties.
    Weighted { alpha: f64, beta: f64, gamma: f64 },
}


#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredHypothesis {
    pub rank: usize,
    pub sql: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    pub violations: usize,
    pub support: usize,
    pub qp_agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RerankedList {
    pub example_id: String,
    pub hypotheses: Vec<ScoredHypothesis>,
}

impl RerankedList {
    pub fn to_nbest(&self) -> NBestList {
        NBestList {
            example_id: self.example_id.clone(),
            hypotheses: self
                .hypotheses
                .iter()
                .map(|h| Hypothesis { rank: h.rank, sql: h.sql.clone(), score: h.score })
                .collect(),
        }
    }
}

/// Orders the list by `policy`. `sl` and `qp` are indexed like
/// `list.hypotheses`. The sort is stable, so full ties keep list order.
pub fn rerank(
    list: &NBestList,
    sl: &[SlScore],
    qp: &[f64],
    policy: RerankPolicy,
) -> Result<RerankedList, RerankError> {
    let n = list.hypotheses.len();
    let missing = |i: usize, what| RerankError::MissingScore {
        example_id: list.example_id.clone(),
        rank: list.hypotheses.get(i).map_or(i, |h| h.rank),
        what,
    };
    if sl.len() < n {
        return Err(missing(sl.len(), "SL score"));
    }
    if qp.len() < n {
        return Err(missing(qp.len(), "QP agreement"));
    }
    let mut scored: Vec<ScoredHypothesis> = list
        .hypotheses
        .iter()
        .zip(sl)
        .zip(qp)
        .map(|((h, s), q)| ScoredHypothesis {
            rank: h.rank,
            sql: h.sql.clone(),
            score: h.score,
            violations: s.violations,
            support: s.support,
            qp_agreement: *q,
        })
        .collect();
    match policy {
        RerankPolicy::Lexicographic => scored.sort_by(|a, b| {
            a.violations
                .cmp(&b.violations)
                .then(b.qp_agreement.total_cmp(&a.qp_agreement))
                .then(b.support.cmp(&a.support))
                .then(a.rank.cmp(&b.rank))
        }),
        RerankPolicy::Weighted { alpha, beta, gamma } => {
            if let Some(i) = scored.iter().position(|h| h.score.is_none()) {
                return Err(missing(i, "model score"));
            }
            let value = |h: &ScoredHypothesis| {
                h.score.unwrap_or(0.0) + alpha * h.qp_agreement - beta * h.violations as f64
                    + gamma * h.support as f64
            };
            scored.sort_by(|a, b| match value(b).total_cmp(&value(a)) {
                Ordering::Equal => a.rank.cmp(&b.rank),
                o => o,
            });
        }
    }
    Ok(RerankedList { example_id: list.example_id.clone(), hypotheses: scored })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RerankConfig {
    pub policy: RerankPolicy,
    pub agreement: AgreementRule,
}

/// Filters, scores and reranks one list. Without content, SL scores are
/// zero; without a QP prediction, every agreement is zero.
pub fn rerank_list(
    list: &NBestList,
    schema: &DatabaseSchema,
    index: Option<&ContentIndex>,
    window: &[&str],
    qp_pred: Option<&QueryPlanProbs>,
    cfg: &RerankConfig,
) -> Result<(RerankedList, bool), RerankError> {
    let filtered = filter_valid(list, schema);
    let asts: Vec<Option<SqlAst>> =
        filtered.list.hypotheses.iter().map(|h| parse_sql(&h.sql, schema).ok()).collect();
    let links = index.map(|_| candidate_links(window, schema, index));
    let sl: Vec<SlScore> = asts
        .iter()
        .map(|a| match (a, index, &links) {
            (Some(a), Some(idx), Some(l)) => sl_score_with_links(a, l, idx),
            _ => SlScore::default(),
        })
        .collect();
    let qp: Vec<f64> = asts
        .iter()
        .map(|a| match (a, qp_pred) {
            (Some(a), Some(p)) => cfg.agreement.score(p, &extract_query_plan(a)),
            _ => 0.0,
        })
        .collect();
    Ok((rerank(&filtered.list, &sl, &qp, cfg.policy)?, filtered.all_invalid))
}
