//! Exact-set and execution scoring of predictions against gold, and the
//! aggregate reports built from them.

mod exact;
mod exec;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

pub use exact::{exact_set_match, hardness, Hardness};
pub use exec::{
    cells_equal, execution_match, results_match, top_level_ordered, Cell, ExecError, ExecMatch, DEFAULT_TIMEOUT,
    FLOAT_REL_TOL,
};

use crate::dialogue::{ContextAnnotations, ContextLabel, DataError, GoldExample};
use crate::par::{map_ordered, ExecMode};
use crate::rerank::NBestList;
use crate::schema::{database_path, DatabaseSchema};
use crate::sql::parse_sql;

#[derive(Deserialize)]
struct PredRecord {
    example_id: String,
    sql: String,
}

/// Predictions file: one `{example_id, sql}` object per line.
pub fn parse_predictions(text: &str) -> Result<BTreeMap<String, String>, DataError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: PredRecord =
            serde_json::from_str(line).map_err(|e| DataError::Format { record: i, message: e.to_string() })?;
        if out.insert(r.example_id.clone(), r.sql).is_some() {
            return Err(DataError::Format { record: i, message: format!("duplicate example_id `{}`", r.example_id) });
        }
    }
    Ok(out)
}

pub fn load_predictions(path: &Path) -> Result<BTreeMap<String, String>, DataError> {
    parse_predictions(&std::fs::read_to_string(path)?)
}

/// `100 * matched / count` in tenths of a percent, rounded half up.
pub fn pct_tenths(matched: usize, count: usize) -> u64 {
    if count == 0 {
        return 0;
    }
    let (m, c) = (matched as u64, count as u64);
    (2000 * m + c) / (2 * c)
}

pub fn format_pct(matched: usize, count: usize) -> String {
    let t = pct_tenths(matched, count);
    format!("{}.{}", t / 10, t % 10)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Score {
    pub count: usize,
    pub em: usize,
    pub ex: usize,
}

impl Score {
    fn add(&mut self, em: bool, ex: bool) {
        self.count += 1;
        self.em += em as usize;
        self.ex += ex as usize;
    }

    pub fn em_pct(&self) -> String {
        format_pct(self.em, self.count)
    }

    pub fn ex_pct(&self) -> String {
        format_pct(self.ex, self.count)
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Score", 5)?;
        st.serialize_field("count", &self.count)?;
        st.serialize_field("em", &self.em)?;
        st.serialize_field("ex", &self.ex)?;
        st.serialize_field("em_pct", &(pct_tenths(self.em, self.count) as f64 / 10.0))?;
        st.serialize_field("ex_pct", &(pct_tenths(self.ex, self.count) as f64 / 10.0))?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalOutcome {
    pub example_id: String,
    pub interaction_id: String,
    pub turn_index: u32,
    pub em: bool,
    /// `None` when execution was not attempted or the gold query failed.
    pub ex: Option<bool>,
    pub ex_timeout: bool,
    /// From the gold query; `None` only if the gold query does not parse.
    pub hardness: Option<Hardness>,
    pub pred_parsed: bool,
    pub missing_prediction: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Root of `<db_id>/<db_id>.sqlite`; execution match is skipped without it.
    pub db_root: Option<PathBuf>,
    pub timeout: Duration,
    pub mode: ExecMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { db_root: None, timeout: DEFAULT_TIMEOUT, mode: ExecMode::default() }
    }
}

struct Judged {
    em: bool,
    ex: Option<bool>,
    timeout: bool,
    parsed: bool,
}

fn judge(
    pred: &str,
    gold: &GoldExample,
    gold_ast: Option<&crate::sql::SqlAst>,
    schema: &DatabaseSchema,
    opts: &EvalOptions,
) -> Result<Judged, String> {
    let pred_ast = parse_sql(pred, schema).ok();
    let em = match (&pred_ast, gold_ast) {
        (Some(p), Some(g)) => exact_set_match(p, g, schema),
        _ => false,
    };
    let mut out = Judged { em, ex: None, timeout: false, parsed: pred_ast.is_some() };
    if let Some(root) = &opts.db_root {
        if pred.trim().is_empty() {
            out.ex = Some(false);
        } else {
            let r = execution_match(pred, &gold.sql, &database_path(root, &gold.db_id), opts.timeout)
                .map_err(|e| e.to_string())?;
            out.ex = Some(r.matched);
            out.timeout = r.timed_out;
        }
    }
    Ok(out)
}

fn evaluate_one(
    pred: Option<&str>,
    gold: &GoldExample,
    schemas: &BTreeMap<String, DatabaseSchema>,
    opts: &EvalOptions,
) -> EvalOutcome {
    let mut out = EvalOutcome {
        example_id: gold.example_id.clone(),
        interaction_id: gold.interaction_id.clone(),
        turn_index: gold.turn_index,
        em: false,
        ex: None,
        ex_timeout: false,
        hardness: None,
        pred_parsed: false,
        missing_prediction: pred.is_none(),
        error: None,
    };
    let Some(schema) = schemas.get(&gold.db_id) else {
        out.error = Some(format!("no schema for `{}`", gold.db_id));
        return out;
    };
    let gold_ast = match parse_sql(&gold.sql, schema) {
        Ok(a) => Some(a),
        Err(e) => {
            out.error = Some(format!("gold does not parse: {e}"));
            None
        }
    };
    out.hardness = gold_ast.as_ref().map(hardness);
    let Some(pred) = pred else {
        log::warn!("{}: no prediction", gold.example_id);
        if opts.db_root.is_some() {
            out.ex = Some(false);
        }
        return out;
    };
    match judge(pred, gold, gold_ast.as_ref(), schema, opts) {
        Ok(j) => {
            out.em = j.em;
            out.ex = j.ex;
            out.ex_timeout = j.timeout;
            out.pred_parsed = j.parsed;
        }
        Err(e) => {
            log::error!("{}: {e}", gold.example_id);
            out.error = Some(e);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardnessRow {
    pub hardness: Option<Hardness>,
    pub score: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub ex_evaluated: bool,
    pub overall: Score,
    /// Easy, medium, hard, extra, then a row for unparseable gold if any.
    pub by_hardness: Vec<HardnessRow>,
    pub outcomes: Vec<EvalOutcome>,
}

impl Report {
    pub fn from_outcomes(outcomes: Vec<EvalOutcome>, ex_evaluated: bool) -> Report {
        let mut overall = Score::default();
        let mut rows: Vec<HardnessRow> =
            Hardness::ALL.iter().map(|h| HardnessRow { hardness: Some(*h), score: Score::default() }).collect();
        let mut unknown = Score::default();
        for o in &outcomes {
            let ex = o.ex.unwrap_or(false);
            overall.add(o.em, ex);
            match o.hardness {
                Some(h) => rows[h as usize].score.add(o.em, ex),
                None => unknown.add(o.em, ex),
            }
        }
        if unknown.count > 0 {
            rows.push(HardnessRow { hardness: None, score: unknown });
        }
        Report { ex_evaluated, overall, by_hardness: rows, outcomes }
    }
}

/// Scores every gold example. A missing prediction counts as wrong.
pub fn evaluate_corpus(
    predictions: &BTreeMap<String, String>,
    gold: &[GoldExample],
    schemas: &BTreeMap<String, DatabaseSchema>,
    opts: &EvalOptions,
) -> Report {
    let outcomes = map_ordered(gold, opts.mode, |g| {
        evaluate_one(predictions.get(&g.example_id).map(String::as_str), g, schemas, opts)
    });
    Report::from_outcomes(outcomes, opts.db_root.is_some())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleOutcome {
    pub example_id: String,
    pub best_em: bool,
    pub best_ex: bool,
    pub oracle_em: bool,
    pub oracle_ex: bool,
    pub list_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub ex_evaluated: bool,
    pub one_best: Score,
    pub oracle: Score,
    pub outcomes: Vec<OracleOutcome>,
}

fn oracle_one(
    list: Option<&NBestList>,
    gold: &GoldExample,
    schemas: &BTreeMap<String, DatabaseSchema>,
    opts: &EvalOptions,
) -> OracleOutcome {
    let mut out = OracleOutcome {
        example_id: gold.example_id.clone(),
        best_em: false,
        best_ex: false,
        oracle_em: false,
        oracle_ex: false,
        list_size: list.map_or(0, |l| l.hypotheses.len()),
    };
    let (Some(list), Some(schema)) = (list, schemas.get(&gold.db_id)) else {
        log::warn!("{}: no n-best list or schema", gold.example_id);
        return out;
    };
    let gold_ast = parse_sql(&gold.sql, schema).ok();
    for (i, h) in list.hypotheses.iter().enumerate() {
        let need_ex = i == 0 || !out.oracle_ex;
        let o = EvalOptions { db_root: if need_ex { opts.db_root.clone() } else { None }, ..opts.clone() };
        let j = match judge(&h.sql, gold, gold_ast.as_ref(), schema, &o) {
            Ok(j) => j,
            Err(e) => {
                log::error!("{}: {e}", gold.example_id);
                break;
            }
        };
        let ex = j.ex.unwrap_or(false);
        if i == 0 {
            out.best_em = j.em;
            out.best_ex = ex;
        }
        out.oracle_em |= j.em;
        out.oracle_ex |= ex;
    }
    out
}

/// 1-best and any-hypothesis accuracy over n-best lists.
pub fn oracle_analysis(
    nbest: &BTreeMap<String, NBestList>,
    gold: &[GoldExample],
    schemas: &BTreeMap<String, DatabaseSchema>,
    opts: &EvalOptions,
) -> OracleReport {
    let outcomes = map_ordered(gold, opts.mode, |g| oracle_one(nbest.get(&g.example_id), g, schemas, opts));
    let mut one_best = Score::default();
    let mut oracle = Score::default();
    for o in &outcomes {
        one_best.add(o.best_em, o.best_ex);
        oracle.add(o.oracle_em, o.oracle_ex);
    }
    OracleReport { ex_evaluated: opts.db_root.is_some(), one_best, oracle, outcomes }
}

pub const TURN_BINS: [&str; 5] = ["1", "2", "3", "4", "5+"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnBin {
    pub bin: &'static str,
    pub score: Score,
    /// Easy, medium, hard, extra.
    pub hardness_counts: [usize; 4],
}

impl TurnBin {
    pub fn hardness_pct(&self, h: Hardness) -> String {
        format_pct(self.hardness_counts[h as usize], self.score.count)
    }
}

pub fn turn_bin(turn_index: u32) -> usize {
    (turn_index.clamp(1, 5) - 1) as usize
}

/// Outcomes binned by turn position, later turns merged into `5+`.
pub fn turn_level_report(report: &Report) -> Vec<TurnBin> {
    let mut bins: Vec<TurnBin> =
        TURN_BINS.iter().map(|b| TurnBin { bin: b, score: Score::default(), hardness_counts: [0; 4] }).collect();
    for o in &report.outcomes {
        let b = &mut bins[turn_bin(o.turn_index)];
        b.score.add(o.em, o.ex.unwrap_or(false));
        if let Some(h) = o.hardness {
            b.hardness_counts[h as usize] += 1;
        }
    }
    bins
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextRow {
    pub label: ContextLabel,
    pub score: Score,
}

/// Outcomes split by context-dependency label. Every outcome needs a label.
pub fn context_report(report: &Report, ann: &ContextAnnotations) -> Result<Vec<ContextRow>, DataError> {
    let mut rows = vec![
        ContextRow { label: ContextLabel::Independent, score: Score::default() },
        ContextRow { label: ContextLabel::Dependent, score: Score::default() },
    ];
    for o in &report.outcomes {
        let label = ann.get(&(o.interaction_id.clone(), o.turn_index)).ok_or_else(|| DataError::Coverage {
            interaction_id: o.interaction_id.clone(),
            turn_index: o.turn_index,
        })?;
        rows[*label as usize].score.add(o.em, o.ex.unwrap_or(false));
    }
    Ok(rows)
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>(), &mut out);
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    let _ = writeln!(out, "{}", "-".repeat(total));
    for r in rows {
        line(r, &mut out);
    }
    out
}

fn ex_cell(s: &Score, evaluated: bool) -> String {
    if evaluated {
        s.ex_pct()
    } else {
        "-".into()
    }
}

/// Count, EM and EX per difficulty level.
pub fn hardness_table(report: &Report) -> String {
    let mut rows: Vec<Vec<String>> = report
        .by_hardness
        .iter()
        .map(|r| {
            vec![
                r.hardness.map_or("unparsed", Hardness::as_str).to_string(),
                r.score.count.to_string(),
                r.score.em_pct(),
                ex_cell(&r.score, report.ex_evaluated),
            ]
        })
        .collect();
    let o = &report.overall;
    rows.push(vec!["total".into(), o.count.to_string(), o.em_pct(), ex_cell(o, report.ex_evaluated)]);
    table(&["difficulty", "count", "EM", "EX"], &rows)
}

/// Per-bin count, EM, EX and difficulty mix.
pub fn turn_table(report: &Report) -> String {
    let bins = turn_level_report(report);
    let rows: Vec<Vec<String>> = bins
        .iter()
        .map(|b| {
            let mut r = vec![
                format!("turn {}", b.bin),
                b.score.count.to_string(),
                b.score.em_pct(),
                ex_cell(&b.score, report.ex_evaluated),
            ];
            r.extend(Hardness::ALL.iter().map(|h| b.hardness_pct(*h)));
            r
        })
        .collect();
    table(&["turn", "count", "EM", "EX", "easy", "medium", "hard", "extra"], &rows)
}

/// Columnar per-bin series: bin, count, EM, EX.
pub fn turn_series(report: &Report) -> String {
    let mut out = String::from("bin\tcount\tem\tex\n");
    for b in turn_level_report(report) {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            b.bin,
            b.score.count,
            b.score.em_pct(),
            ex_cell(&b.score, report.ex_evaluated)
        );
    }
    out
}

pub fn oracle_table(r: &OracleReport) -> String {
    let rows = vec![
        vec!["1-best".to_string(), r.one_best.em_pct(), ex_cell(&r.one_best, r.ex_evaluated)],
        vec!["oracle".to_string(), r.oracle.em_pct(), ex_cell(&r.oracle, r.ex_evaluated)],
    ];
    table(&["", "EM", "EX"], &rows)
}

pub fn context_table(rows: &[ContextRow], ex_evaluated: bool) -> String {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![r.label.as_str().to_string(), r.score.count.to_string(), r.score.em_pct(), ex_cell(&r.score, ex_evaluated)]
        })
        .collect();
    table(&["context", "count", "EM", "EX"], &rows)
}
