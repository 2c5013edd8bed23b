use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use text2sql_core::dialogue::{
    build_mt_mixture, gold_examples, load_context_annotations, serialize_interaction, utterance_window, write_jsonl,
    DatasetKind, GoldExample, Interaction, MixRecord, SerializeOptions, SerializedExample,
};
use text2sql_core::eval::{
    context_report, context_table, evaluate_corpus, hardness, hardness_table, load_predictions,
    oracle_analysis, oracle_table, pct_tenths, turn_level_report, turn_series, turn_table, ContextRow, EvalOptions,
    EvalOutcome, Hardness, OracleReport, Report, Score, TurnBin,
};
use text2sql_core::linking::{candidate_links, sl_score_with_links, LinkSet};
use text2sql_core::par::{map_ordered, ExecMode};
use text2sql_core::query_plan::{
    extract_query_plan, load_qp_predictions, write_qp_labels, write_qp_predictions, AgreementRule, QueryPlanProbs,
};
use text2sql_core::rerank::{load_nbest, rerank_list, NBestList, RerankConfig, RerankPolicy};
use text2sql_core::schema::{ContentIndex, DatabaseSchema};
use text2sql_core::splits::{cg_manifest, cg_resplit, template_inventory, zsg_manifest, zsg_subset};
use text2sql_core::sql::parse_sql;

use crate::args::*;
use crate::io::{invalid, load_schemas, prepare, to_json, write_atomic, DatasetSpec};

pub struct Ctx<'a> {
    pub global: &'a GlobalArgs,
    pub mode: ExecMode,
}

fn timeout(secs: f64) -> Result<Duration> {
    if !(secs.is_finite() && secs > 0.0) {
        return Err(invalid(format!("--timeout {secs}: must be a positive number of seconds")));
    }
    Ok(Duration::from_secs_f64(secs))
}

fn load_all(specs: &[DatasetSpec]) -> Result<Vec<(DatasetSpec, Vec<Interaction>)>> {
    specs.iter().map(|s| Ok((s.clone(), s.load()?))).collect()
}

fn schema_for<'s>(schemas: &'s BTreeMap<String, DatabaseSchema>, db_id: &str, what: &str) -> Result<&'s DatabaseSchema> {
    schemas.get(db_id).with_context(|| format!("{what}: no schema for database `{db_id}`"))
}

fn open_indices(
    ctx: &Ctx,
    db_root: &Path,
    db_ids: BTreeSet<String>,
) -> Result<BTreeMap<String, ContentIndex>> {
    let ids: Vec<String> = db_ids.into_iter().collect();
    let opened = map_ordered(&ids, ctx.mode, |id| ContentIndex::open(db_root, id, ctx.global.categorical_threshold));
    ids.into_iter()
        .zip(opened)
        .map(|(id, r)| r.map(|ix| (id.clone(), ix)).with_context(|| format!("reading content of `{id}`")))
        .collect()
}

/// Example id → (interaction, position of the turn).
fn turn_positions(data: &[Interaction]) -> BTreeMap<String, (&Interaction, usize)> {
    let mut out = BTreeMap::new();
    for inter in data {
        for (pos, t) in inter.turns.iter().enumerate() {
            if t.gold_sql.is_some() {
                out.insert(text2sql_core::dialogue::example_id(&inter.id, t.turn_index), (inter, pos));
            }
        }
    }
    out
}

fn top1(lists: &[NBestList]) -> BTreeMap<String, String> {
    lists.iter().map(|l| (l.example_id.clone(), l.hypotheses[0].sql.clone())).collect()
}

fn warn_unknown<'a>(ids: impl Iterator<Item = &'a String>, gold: &[GoldExample], what: &str) {
    let known: BTreeSet<&str> = gold.iter().map(|g| g.example_id.as_str()).collect();
    let extra = ids.filter(|id| !known.contains(id.as_str())).count();
    if extra > 0 {
        log::warn!("{extra} {what} do not match any gold example and are ignored");
    }
}

#[derive(Serialize)]
struct EvalFile<'a> {
    dataset: &'a str,
    report: &'a Report,
    turn_bins: Vec<TurnBin>,
    #[serde(skip_serializing_if = "Option::is_none")]
    context: Option<&'a [ContextRow]>,
}

fn summary_line(name: &str, r: &Report) -> String {
    let ex = if r.ex_evaluated { r.overall.ex_pct() } else { "-".into() };
    format!("{name}: {} examples  EM {}  EX {}\n", r.overall.count, r.overall.em_pct(), ex)
}

pub fn evaluate(ctx: &Ctx, a: &EvaluateArgs) -> Result<()> {
    let inp = prepare(
        ctx.global,
        std::slice::from_ref(&a.dataset),
        false,
        &[("--pred", a.source.pred.as_deref()), ("--nbest", a.source.nbest.as_deref()), ("--context", a.context.as_deref())],
        &[],
        &[("--out-dir", Some(&a.out_dir))],
    )?;
    let timeout = timeout(a.timeout)?;
    let spec = &inp.datasets[0];
    let gold = gold_examples(&spec.load()?);
    let schemas = load_schemas(&inp.tables)?;
    let preds = match (&a.source.pred, &a.source.nbest) {
        (Some(p), _) => load_predictions(p).with_context(|| format!("reading {}", p.display()))?,
        (None, Some(n)) => top1(&load_nbest(n).with_context(|| format!("reading {}", n.display()))?),
        (None, None) => unreachable!("clap requires one prediction source"),
    };
    warn_unknown(preds.keys(), &gold, "predictions");
    let opts = EvalOptions { db_root: inp.db_root.clone(), timeout, mode: ctx.mode };
    let report = evaluate_corpus(&preds, &gold, &schemas, &opts);
    let context = match &a.context {
        Some(p) => {
            let ann = load_context_annotations(p, &gold).with_context(|| format!("reading {}", p.display()))?;
            Some(context_report(&report, &ann)?)
        }
        None => None,
    };

    let mut text = summary_line(&a.dataset, &report);
    text.push('\n');
    text.push_str(&hardness_table(&report));
    text.push('\n');
    text.push_str(&turn_table(&report));
    if let Some(rows) = &context {
        text.push('\n');
        text.push_str(&context_table(rows, report.ex_evaluated));
    }
    let file = EvalFile {
        dataset: &a.dataset,
        report: &report,
        turn_bins: turn_level_report(&report),
        context: context.as_deref(),
    };
    write_atomic(&a.out_dir.join("report.json"), &to_json(&file))?;
    write_atomic(&a.out_dir.join("report.txt"), &text)?;
    write_atomic(&a.out_dir.join("turn_series.tsv"), &turn_series(&report))?;
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct RerankedHyp<'a> {
    rank: usize,
    original_rank: usize,
    sql: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    violations: usize,
    support: usize,
    qp_agreement: f64,
}

#[derive(Serialize)]
struct RerankedRecord<'a> {
    example_id: &'a str,
    all_invalid: bool,
    hypotheses: Vec<RerankedHyp<'a>>,
}

fn signed_delta(before: usize, after: usize, count: usize) -> String {
    let d = pct_tenths(after, count) as i64 - pct_tenths(before, count) as i64;
    format!("{}{}.{}", if d < 0 { "-" } else { "+" }, d.abs() / 10, d.abs() % 10)
}

#[derive(Serialize)]
struct RerankReport {
    dataset: String,
    policy: RerankPolicy,
    agreement: AgreementRule,
    lists: usize,
    all_invalid_lists: usize,
    changed_top: usize,
    before: Score,
    after: Score,
    ex_evaluated: bool,
}

pub fn rerank(ctx: &Ctx, a: &RerankArgs) -> Result<()> {
    let inp = prepare(
        ctx.global,
        std::slice::from_ref(&a.dataset),
        false,
        &[("--nbest", Some(&a.nbest)), ("--qp", a.qp.as_deref())],
        &[("--out", Some(&a.out))],
        &[("--report-dir", a.report_dir.as_deref())],
    )?;
    if !(a.qp_threshold > 0.0 && a.qp_threshold < 1.0) {
        return Err(invalid(format!("--qp-threshold {}: must be in (0, 1)", a.qp_threshold)));
    }
    for (flag, v) in [("--alpha", a.alpha), ("--beta", a.beta), ("--gamma", a.gamma)] {
        if !v.is_finite() {
            return Err(invalid(format!("{flag} {v}: must be finite")));
        }
    }
    let timeout = timeout(a.timeout)?;
    let cfg = RerankConfig {
        policy: match a.policy {
            PolicyArg::Lexicographic => RerankPolicy::Lexicographic,
            PolicyArg::Weighted => RerankPolicy::Weighted { alpha: a.alpha, beta: a.beta, gamma: a.gamma },
        },
        agreement: match a.agreement {
            AgreementArg::Count => AgreementRule::Count { threshold: a.qp_threshold },
            AgreementArg::Weighted => AgreementRule::Weighted,
        },
    };
    let data = inp.datasets[0].load()?;
    let gold = gold_examples(&data);
    let positions = turn_positions(&data);
    let schemas = load_schemas(&inp.tables)?;
    let lists = load_nbest(&a.nbest).with_context(|| format!("reading {}", a.nbest.display()))?;
    let qp = match &a.qp {
        Some(p) => Some(load_qp_predictions(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let mut db_ids = BTreeSet::new();
    for l in &lists {
        let Some((inter, _)) = positions.get(&l.example_id) else {
            bail!("n-best list `{}` does not match any example of {}", l.example_id, a.dataset);
        };
        db_ids.insert(inter.db_id.clone());
    }
    let indices = match &inp.db_root {
        Some(root) => open_indices(ctx, root, db_ids)?,
        None => {
            log::warn!("no --db-root: schema-linking scores are zero");
            BTreeMap::new()
        }
    };
    if qp.is_none() {
        log::warn!("no --qp: query-plan agreement is zero");
    }
    let results = map_ordered(&lists, ctx.mode, |l| {
        let (inter, pos) = positions[&l.example_id];
        let schema = schema_for(&schemas, &inter.db_id, &l.example_id)?;
        let window = utterance_window(inter, pos, None);
        let qp_pred = qp.as_ref().and_then(|m| m.get(&l.example_id));
        rerank_list(l, schema, indices.get(&inter.db_id), &window, qp_pred, &cfg).map_err(anyhow::Error::from)
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut out = String::new();
    for (list, all_invalid) in &results {
        let rec = RerankedRecord {
            example_id: &list.example_id,
            all_invalid: *all_invalid,
            hypotheses: list
                .hypotheses
                .iter()
                .enumerate()
                .map(|(i, h)| RerankedHyp {
                    rank: i,
                    original_rank: h.rank,
                    sql: &h.sql,
                    score: h.score,
                    violations: h.violations,
                    support: h.support,
                    qp_agreement: h.qp_agreement,
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    write_atomic(&a.out, &out)?;

    let all_invalid_lists = results.iter().filter(|(_, b)| *b).count();
    let changed_top = results.iter().filter(|(l, _)| l.hypotheses[0].rank != 0).count();
    eprintln!("reranked {} lists; top changed in {changed_top}; {all_invalid_lists} had no valid hypothesis", lists.len());

    if let Some(dir) = &a.report_dir {
        let opts = EvalOptions { db_root: inp.db_root.clone(), timeout, mode: ctx.mode };
        let before = evaluate_corpus(&top1(&lists), &gold, &schemas, &opts);
        let after_preds: BTreeMap<String, String> =
            results.iter().map(|(l, _)| (l.example_id.clone(), l.hypotheses[0].sql.clone())).collect();
        let after = evaluate_corpus(&after_preds, &gold, &schemas, &opts);
        let rep = RerankReport {
            dataset: a.dataset.clone(),
            policy: cfg.policy,
            agreement: cfg.agreement,
            lists: lists.len(),
            all_invalid_lists,
            changed_top,
            before: before.overall,
            after: after.overall,
            ex_evaluated: opts.db_root.is_some(),
        };
        let n = before.overall.count;
        let ex = |s: &Score| if rep.ex_evaluated { s.ex_pct() } else { "-".into() };
        let mut text = String::new();
        let _ = writeln!(text, "{:<8}  {:>6}  {:>6}", "", "EM", "EX");
        let _ = writeln!(text, "{:<8}  {:>6}  {:>6}", "before", before.overall.em_pct(), ex(&before.overall));
        let _ = writeln!(text, "{:<8}  {:>6}  {:>6}", "after", after.overall.em_pct(), ex(&after.overall));
        let dex = if rep.ex_evaluated { signed_delta(before.overall.ex, after.overall.ex, n) } else { "-".into() };
        let _ = writeln!(text, "{:<8}  {:>6}  {:>6}", "delta", signed_delta(before.overall.em, after.overall.em, n), dex);
        write_atomic(&dir.join("rerank_report.json"), &to_json(&rep))?;
        write_atomic(&dir.join("rerank_report.txt"), &text)?;
        print!("{text}");
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleFile<'a> {
    dataset: &'a str,
    report: &'a OracleReport,
}

pub fn oracle(ctx: &Ctx, a: &OracleArgs) -> Result<()> {
    let inp = prepare(
        ctx.global,
        std::slice::from_ref(&a.dataset),
        false,
        &[("--nbest", Some(&a.nbest))],
        &[],
        &[("--out-dir", Some(&a.out_dir))],
    )?;
    let timeout = timeout(a.timeout)?;
    let gold = gold_examples(&inp.datasets[0].load()?);
    let schemas = load_schemas(&inp.tables)?;
    let lists = load_nbest(&a.nbest).with_context(|| format!("reading {}", a.nbest.display()))?;
    warn_unknown(lists.iter().map(|l| &l.example_id), &gold, "n-best lists");
    let nbest: BTreeMap<String, NBestList> = lists.into_iter().map(|l| (l.example_id.clone(), l)).collect();
    let opts = EvalOptions { db_root: inp.db_root.clone(), timeout, mode: ctx.mode };
    let report = oracle_analysis(&nbest, &gold, &schemas, &opts);
    let text = format!("{}: {} examples\n\n{}", a.dataset, report.one_best.count, oracle_table(&report));
    write_atomic(&a.out_dir.join("oracle.json"), &to_json(&OracleFile { dataset: &a.dataset, report: &report }))?;
    write_atomic(&a.out_dir.join("oracle.txt"), &text)?;
    print!("{text}");
    Ok(())
}

pub fn qp_extract(ctx: &Ctx, a: &QpExtractArgs) -> Result<()> {
    let inp = prepare(
        ctx.global,
        &a.dataset,
        false,
        &[],
        &[("--out", Some(&a.out)), ("--oracle-probs", a.oracle_probs.as_deref())],
        &[],
    )?;
    let schemas = load_schemas(&inp.tables)?;
    let mut gold = Vec::new();
    for (_, data) in load_all(&inp.datasets)? {
        gold.extend(gold_examples(&data));
    }
    let plans = map_ordered(&gold, ctx.mode, |g| {
        let schema = schemas.get(&g.db_id)?;
        parse_sql(&g.sql, schema).ok().map(|a| extract_query_plan(&a))
    });
    let mut labels = Vec::new();
    let mut skipped = 0;
    for (g, p) in gold.iter().zip(plans) {
        match p {
            Some(p) => labels.push((g.example_id.as_str(), p)),
            None => {
                skipped += 1;
                log::warn!("{}: gold does not parse, no label", g.example_id);
            }
        }
    }
    write_atomic(&a.out, &write_qp_labels(labels.iter().map(|(id, p)| (*id, *p))))?;
    if let Some(path) = &a.oracle_probs {
        let probs: BTreeMap<String, QueryPlanProbs> =
            labels.iter().map(|(id, p)| (id.to_string(), QueryPlanProbs::one_hot(p))).collect();
        write_atomic(path, &write_qp_predictions(&probs))?;
    }
    eprintln!("{} labels written, {skipped} gold queries skipped", labels.len());
    Ok(())
}

#[derive(Serialize)]
struct SlHyp<'a> {
    rank: usize,
    sql: &'a str,
    parsed: bool,
    violations: usize,
    support: usize,
}

#[derive(Serialize)]
struct SlRecord<'a> {
    example_id: String,
    db_id: &'a str,
    window: Vec<&'a str>,
    links: LinkSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    hypotheses: Option<Vec<SlHyp<'a>>>,
}

pub fn sl_diagnose(ctx: &Ctx, a: &SlDiagnoseArgs) -> Result<()> {
    let inp = prepare(
        ctx.global,
        std::slice::from_ref(&a.dataset),
        true,
        &[("--nbest", a.nbest.as_deref())],
        &[("--out", Some(&a.out))],
        &[],
    )?;
    let data = inp.datasets[0].load()?;
    let schemas = load_schemas(&inp.tables)?;
    let nbest: BTreeMap<String, NBestList> = match &a.nbest {
        Some(p) => load_nbest(p)
            .with_context(|| format!("reading {}", p.display()))?
            .into_iter()
            .map(|l| (l.example_id.clone(), l))
            .collect(),
        None => BTreeMap::new(),
    };
    let db_root = inp.db_root.as_deref().expect("checked by prepare");
    let indices = open_indices(ctx, db_root, data.iter().map(|i| i.db_id.clone()).collect())?;
    let positions: Vec<(String, (&Interaction, usize))> = turn_positions(&data).into_iter().collect();
    let records = map_ordered(&positions, ctx.mode, |(id, (inter, pos))| {
        let schema = schema_for(&schemas, &inter.db_id, id)?;
        let index = &indices[&inter.db_id];
        let window = utterance_window(inter, *pos, None);
        let links = candidate_links(&window, schema, Some(index));
        let hypotheses = nbest.get(id).map(|l| {
            l.hypotheses
                .iter()
                .map(|h| match parse_sql(&h.sql, schema) {
                    Ok(ast) => {
                        let s = sl_score_with_links(&ast, &links, index);
                        SlHyp { rank: h.rank, sql: &h.sql, parsed: true, violations: s.violations, support: s.support }
                    }
                    Err(_) => SlHyp { rank: h.rank, sql: &h.sql, parsed: false, violations: 0, support: 0 },
                })
                .collect()
        });
        Ok(SlRecord { example_id: id.clone(), db_id: &inter.db_id, window, links, hypotheses })
    });
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;
    write_atomic(&a.out, &write_jsonl(&records))?;
    eprintln!("{} examples diagnosed", records.len());
    Ok(())
}

fn serialize_dataset(
    ctx: &Ctx,
    spec: &DatasetSpec,
    data: &[Interaction],
    schemas: &BTreeMap<String, DatabaseSchema>,
    indices: &BTreeMap<String, ContentIndex>,
    opts: &SerializeOptions,
) -> Result<Vec<SerializedExample>> {
    let per = map_ordered(data, ctx.mode, |inter| {
        let schema = schema_for(schemas, &inter.db_id, &inter.id)?;
        Ok(serialize_interaction(inter, schema, indices.get(&inter.db_id), opts))
    });
    let per = per.into_iter().collect::<Result<Vec<_>>>().with_context(|| format!("serializing {}", spec.tag))?;
    Ok(per.into_iter().flatten().collect())
}

fn content_indices(
    ctx: &Ctx,
    with_content: bool,
    db_root: Option<&PathBuf>,
    data: &[&[Interaction]],
) -> Result<BTreeMap<String, ContentIndex>> {
    if !with_content {
        return Ok(BTreeMap::new());
    }
    let root = db_root.ok_or_else(|| invalid("--with-content needs --db-root or TEXT2SQL_DB_ROOT"))?;
    open_indices(ctx, root, data.iter().flat_map(|d| d.iter().map(|i| i.db_id.clone())).collect())
}

pub fn serialize(ctx: &Ctx, a: &SerializeArgs) -> Result<()> {
    let inp = prepare(ctx.global, std::slice::from_ref(&a.dataset), a.context.with_content, &[], &[("--out", Some(&a.out))], &[])?;
    let spec = &inp.datasets[0];
    let data = spec.load()?;
    let schemas = load_schemas(&inp.tables)?;
    let indices = content_indices(ctx, a.context.with_content, inp.db_root.as_ref(), &[&data])?;
    let opts = SerializeOptions {
        prompt: a.prompt.clone(),
        max_context_tokens: a.context.max_context_tokens,
        with_content: a.context.with_content,
    };
    let exs = serialize_dataset(ctx, spec, &data, &schemas, &indices, &opts)?;
    let records: Vec<MixRecord> = exs
        .into_iter()
        .map(|e| MixRecord {
            input_text: e.input_text,
            target_sql: e.target_sql,
            example_id: e.example_id,
            db_id: e.db_id,
            dataset: spec.kind,
        })
        .collect();
    write_atomic(&a.out, &write_jsonl(&records))?;
    eprintln!("{} examples serialized", records.len());
    Ok(())
}

#[derive(Serialize)]
struct MixManifest {
    seed: u64,
    datasets: Vec<MixSource>,
    total: usize,
}

#[derive(Serialize)]
struct MixSource {
    name: String,
    kind: DatasetKind,
    weight: f64,
    examples: usize,
    emitted: usize,
}

pub fn mt_mix(ctx: &Ctx, a: &MtMixArgs) -> Result<()> {
    let manifest_path = sidecar(&a.out);
    let inp = prepare(
        ctx.global,
        &a.dataset,
        a.context.with_content,
        &[],
        &[("--out", Some(&a.out)), ("manifest", Some(&manifest_path))],
        &[],
    )?;
    if let Some(w) = &a.weights {
        if w.len() != a.dataset.len() {
            return Err(invalid(format!("--weights: {} values for {} datasets", w.len(), a.dataset.len())));
        }
        if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(invalid(format!("--weights: {bad} is not a positive number")));
        }
    }
    let loaded = load_all(&inp.datasets)?;
    let schemas = load_schemas(&inp.tables)?;
    let slices: Vec<&[Interaction]> = loaded.iter().map(|(_, d)| d.as_slice()).collect();
    let indices = content_indices(ctx, a.context.with_content, inp.db_root.as_ref(), &slices)?;
    let opts = SerializeOptions {
        prompt: None,
        max_context_tokens: a.context.max_context_tokens,
        with_content: a.context.with_content,
    };
    let mut parts = Vec::new();
    for (spec, data) in &loaded {
        parts.push((spec.kind, serialize_dataset(ctx, spec, data, &schemas, &indices, &opts)?));
    }
    let mix = build_mt_mixture(&parts, a.weights.as_deref(), a.seed)?;
    let weights = a.weights.clone().unwrap_or_else(|| vec![1.0; parts.len()]);
    let manifest = MixManifest {
        seed: a.seed,
        datasets: loaded
            .iter()
            .zip(&parts)
            .zip(&weights)
            .map(|(((spec, _), (_, exs)), w)| {
                let ids: BTreeSet<&str> = exs.iter().map(|e| e.example_id.as_str()).collect();
                MixSource {
                    name: spec.tag.clone(),
                    kind: spec.kind,
                    weight: *w,
                    examples: exs.len(),
                    emitted: mix.iter().filter(|r| r.dataset == spec.kind && ids.contains(r.example_id.as_str())).count(),
                }
            })
            .collect(),
        total: mix.len(),
    };
    write_atomic(&a.out, &write_jsonl(&mix))?;
    write_atomic(&manifest_path, &to_json(&manifest))?;
    eprintln!("{} examples in the mixture", mix.len());
    Ok(())
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn split_zsg(ctx: &Ctx, a: &SplitZsgArgs) -> Result<()> {
    let mut specs = a.train.clone();
    specs.push(a.dev.clone());
    let inp = prepare(ctx.global, &specs, false, &[], &[("--out", Some(&a.out))], &[])?;
    let mut loaded = load_all(&inp.datasets)?;
    let (_, dev_data) = loaded.pop().expect("dev dataset present");
    let schemas = load_schemas(&inp.tables)?;
    let train: Vec<GoldExample> = loaded.iter().flat_map(|(_, d)| gold_examples(d)).collect();
    let dev = gold_examples(&dev_data);
    let inv = template_inventory(&train, &schemas, ctx.mode)?;
    let split = zsg_subset(&dev, &inv, &schemas, ctx.mode)?;
    write_atomic(&a.out, &zsg_manifest(&split, &dev, inv.len(), a.seed))?;
    eprintln!(
        "{} training templates; dev {} seen, {} unseen",
        inv.len(),
        split.seen.len(),
        split.unseen.len()
    );
    Ok(())
}

pub fn split_cg(ctx: &Ctx, a: &SplitCgArgs) -> Result<()> {
    if !(a.dev_fraction > 0.0 && a.dev_fraction < 1.0) {
        return Err(invalid(format!("--dev-fraction {}: must be in (0, 1)", a.dev_fraction)));
    }
    let inp = prepare(ctx.global, &a.dataset, false, &[], &[("--out", Some(&a.out))], &[])?;
    let data: Vec<Interaction> = load_all(&inp.datasets)?.into_iter().flat_map(|(_, d)| d).collect();
    let schemas = load_schemas(&inp.tables)?;
    let split = cg_resplit(&data, &schemas, a.seed, a.dev_fraction, ctx.mode)?;
    write_atomic(&a.out, &cg_manifest(&split, a.seed, a.dev_fraction))?;
    eprintln!("{} train and {} dev interactions", split.train.len(), split.dev.len());
    Ok(())
}

/// Outcomes carrying only gold-side fields, for statistics without
/// predictions.
fn gold_only_report(gold: &[GoldExample], schemas: &BTreeMap<String, DatabaseSchema>, mode: ExecMode) -> Report {
    let outcomes = map_ordered(gold, mode, |g| EvalOutcome {
        example_id: g.example_id.clone(),
        interaction_id: g.interaction_id.clone(),
        turn_index: g.turn_index,
        em: false,
        ex: None,
        ex_timeout: false,
        hardness: schemas.get(&g.db_id).and_then(|s| parse_sql(&g.sql, s).ok()).map(|a| hardness(&a)),
        pred_parsed: false,
        missing_prediction: true,
        error: None,
    });
    Report::from_outcomes(outcomes, false)
}

pub fn stats(ctx: &Ctx, a: &StatsArgs) -> Result<()> {
    let inp = prepare(ctx.global, &a.dataset, false, &[("--pred", a.pred.as_deref())], &[("--out", Some(&a.out))], &[])?;
    let timeout = timeout(a.timeout)?;
    let loaded = load_all(&inp.datasets)?;
    let schemas = load_schemas(&inp.tables)?;

    let mut text = String::from("dataset\tinteractions\tturns\tsql_turns\teasy\tmedium\thard\textra\tunparsed\n");
    let mut reports = Vec::new();
    for (i, (spec, data)) in loaded.iter().enumerate() {
        let counts = text2sql_core::dialogue::dataset_counts(data);
        let gold = gold_examples(data);
        let report = match (&a.pred, i) {
            (Some(p), 0) => {
                let preds = load_predictions(p).with_context(|| format!("reading {}", p.display()))?;
                warn_unknown(preds.keys(), &gold, "predictions");
                let opts = EvalOptions { db_root: inp.db_root.clone(), timeout, mode: ctx.mode };
                evaluate_corpus(&preds, &gold, &schemas, &opts)
            }
            _ => gold_only_report(&gold, &schemas, ctx.mode),
        };
        let by: Vec<usize> = Hardness::ALL.iter().map(|h| report.by_hardness[*h as usize].score.count).collect();
        let unparsed = report.by_hardness.get(4).map_or(0, |r| r.score.count);
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            a.dataset[i], counts.interactions, counts.turns, counts.sql_turns, by[0], by[1], by[2], by[3], unparsed
        );
        reports.push((spec, report, a.pred.is_some() && i == 0));
    }
    text.push_str("\ndataset\tbin\tcount\tem\tex\teasy\tmedium\thard\textra\n");
    for (i, (_, report, scored)) in reports.iter().enumerate() {
        for b in turn_level_report(report) {
            let em = if *scored { b.score.em_pct() } else { "-".into() };
            let ex = if *scored && report.ex_evaluated { b.score.ex_pct() } else { "-".into() };
            let mix: Vec<String> = Hardness::ALL.iter().map(|h| b.hardness_pct(*h)).collect();
            let _ = writeln!(text, "{}\t{}\t{}\t{}\t{}\t{}", a.dataset[i], b.bin, b.score.count, em, ex, mix.join("\t"));
        }
    }
    write_atomic(&a.out, &text)?;
    print!("{text}");
    Ok(())
}
