//! Eight-clause query plans: extraction, classifier output ingestion and
//! agreement scoring.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sql::{clause_flags, SqlAst};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Clause {
    Where,
    Except,
    Union,
    Intersect,
    GroupBy,
    Having,
    OrderBy,
    Limit,
}

impl Clause {
    pub const ALL: [Clause; 8] = [
        Clause::Where,
        Clause::Except,
        Clause::Union,
        Clause::Intersect,
        Clause::GroupBy,
        Clause::Having,
        Clause::OrderBy,
        Clause::Limit,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Clause::Where => "WHERE",
            Clause::Except => "EXCEPT",
            Clause::Union => "UNION",
            Clause::Intersect => "INTERSECT",
            Clause::GroupBy => "GROUP BY",
            Clause::Having => "HAVING",
            Clause::OrderBy => "ORDER BY",
            Clause::Limit => "LIMIT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct QueryPlan {
    pub flags: [bool; 8],
}

impl QueryPlan {
    pub fn get(&self, c: Clause) -> bool {
        self.flags[c.index()]
    }

    pub fn set(&mut self, c: Clause, on: bool) {
        self.flags[c.index()] = on;
    }

    pub fn to_bits(&self) -> String {
        self.flags.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bits(bits: &str) -> Option<QueryPlan> {
        if bits.len() != 8 {
            return None;
        }
        let mut plan = QueryPlan::default();
        for (i, ch) in bits.chars().enumerate() {
            plan.flags[i] = match ch {
                '0' => false,
                '1' => true,
                _ => return None,
            };
        }
        Some(plan)
    }
}

impl fmt::Display for QueryPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bits())
    }
}

pub fn extract_query_plan(ast: &SqlAst) -> QueryPlan {
    clause_flags(ast)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryPlanProbs {
    pub probs: [f64; 8],
}

impl QueryPlanProbs {
    /// Probabilities of 0 or 1 taken from a known plan.
    pub fn one_hot(plan: &QueryPlan) -> QueryPlanProbs {
        let mut probs = [0.0; 8];
        for (p, &f) in probs.iter_mut().zip(&plan.flags) {
            *p = if f { 1.0 } else { 0.0 };
        }
        QueryPlanProbs { probs }
    }

    pub fn threshold(&self, threshold: f64) -> QueryPlan {
        let mut plan = QueryPlan::default();
        for (f, &p) in plan.flags.iter_mut().zip(&self.probs) {
            *f = p >= threshold;
        }
        plan
    }
}

#[derive(Debug, Error)]
pub enum QpError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: probability {value} for `{example_id}` is outside [0, 1]")]
    Range { line: usize, example_id: String, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Deserialize)]
struct RawPrediction {
    example_id: String,
    probs: Vec<f64>,
}

pub fn parse_qp_predictions(text: &str) -> Result<BTreeMap<String, QueryPlanProbs>, QpError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPrediction = serde_json::from_str(line)
            .map_err(|e| QpError::Format { line: line_no, message: e.to_string() })?;
        let probs: [f64; 8] = raw.probs.as_slice().try_into().map_err(|_| QpError::Format {
            line: line_no,
            message: format!("expected 8 probabilities, found {}", raw.probs.len()),
        })?;
        if let Some(&bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(QpError::Range { line: line_no, example_id: raw.example_id, value: bad });
        }
        if out.insert(raw.example_id.clone(), QueryPlanProbs { probs }).is_some() {
            return Err(QpError::Format {
                line: line_no,
                message: format!("duplicate example id `{}`", raw.example_id),
            });
        }
    }
    Ok(out)
}

pub fn load_qp_predictions(path: &Path) -> Result<BTreeMap<String, QueryPlanProbs>, QpError> {
    parse_qp_predictions(&std::fs::read_to_string(path)?)
}

/// One JSON line per prediction, in id order.
pub fn write_qp_predictions(preds: &BTreeMap<String, QueryPlanProbs>) -> String {
    let mut out = String::new();
    for (id, p) in preds {
        let rec = serde_json::json!({ "example_id": id, "probs": p.probs });
        out.push_str(&rec.to_string());
        out.push('\n');
    }
    out
}

/// Training labels for the external classifier: `{example_id, bitstring}`.
pub fn write_qp_labels<'a>(labels: impl IntoIterator<Item = (&'a str, QueryPlan)>) -> String {
    let mut out = String::new();
    for (id, plan) in labels {
        let rec = serde_json::json!({ "example_id": id, "bitstring": plan.to_bits() });
        out.push_str(&rec.to_string());
        out.push('\n');
    }
    out
}

/// Number of clauses where the thresholded prediction agrees with the
/// hypothesis plan (0..=8). A probability equal to the threshold counts as
/// predicted present.
pub fn qp_agreement(pred: &QueryPlanProbs, hyp: &QueryPlan, threshold: f64) -> u8 {
    pred.threshold(threshold)
        .flags
        .iter()
        .zip(&hyp.flags)
        .filter(|(a, b)| a == b)
        .count() as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgreementRule {
    Count { threshold: f64 },
    /// `8 - Σ|p - f|`, higher is better.
    Weighted,
}

impl Default for AgreementRule {
    fn default() -> Self {
        AgreementRule::Count { threshold: 0.5 }
    }
}

impl AgreementRule {
    pub fn score(&self, pred: &QueryPlanProbs, hyp: &QueryPlan) -> f64 {
        match *self {
            AgreementRule::Count { threshold } => qp_agreement(pred, hyp, threshold) as f64,
            AgreementRule::Weighted => {
                let dist: f64 = pred
                    .probs
                    .iter()
                    .zip(&hyp.flags)
                    .map(|(&p, &f)| (p - if f { 1.0 } else { 0.0 }).abs())
                    .sum();
                8.0 - dist
            }
        }
    }
}
