//! Oracle dominance and reranker soundness on synthetic n-best lists.

use std::collections::BTreeMap;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use text2sql_core::dialogue::{DatasetKind, GoldExample};
use text2sql_core::eval::{exact_set_match, execution_match, oracle_analysis, EvalOptions};
use text2sql_core::linking::sl_score;
use text2sql_core::par::ExecMode;
use text2sql_core::query_plan::{extract_query_plan, qp_agreement, AgreementRule, QueryPlanProbs};
use text2sql_core::rerank::{rerank_list, Hypothesis, NBestList, RerankConfig};
use text2sql_core::sql::parse_sql;

use crate::world::{apply, Edit, Query, World, BASES, DB_ID};
use crate::Verdict;

const LISTS: usize = 1000;
const CORPUS_SIZE: usize = 20;
const MAX_LIST: usize = 10;
const RERANK_CASES: usize = 500;
const TIMEOUT: Duration = Duration::from_secs(30);

fn gold(i: usize, sql: String) -> GoldExample {
    let interaction_id = format!("syn_{i}");
    GoldExample {
        example_id: format!("{interaction_id}_t1"),
        interaction_id,
        turn_index: 1,
        db_id: DB_ID.to_string(),
        sql,
        kind: DatasetKind::Cosql,
    }
}

fn list(example_id: &str, sqls: Vec<String>) -> NBestList {
    NBestList {
        example_id: example_id.to_string(),
        hypotheses: sqls
            .into_iter()
            .enumerate()
            .map(|(rank, sql)| Hypothesis { rank, sql, score: Some(-(rank as f64)) })
            .collect(),
    }
}

/// The gold query, an edit of it, another base query, or unparseable text.
fn hypothesis(gold: &Query, rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..10) {
        0..=1 => gold.sql(),
        2..=6 => {
            let edit = *Edit::ALL.choose(rng).unwrap();
            apply(gold, edit, rng).map_or_else(|| gold.sql(), |q| q.sql())
        }
        7..=8 => Query::of(BASES.choose(rng).unwrap()).sql(),
        _ => "SELECT FROM singer WHERE".to_string(),
    }
}

fn synthetic_lists(rng: &mut ChaCha8Rng) -> Vec<(GoldExample, NBestList)> {
    (0..LISTS)
        .map(|i| {
            let q = Query::of(BASES.choose(rng).unwrap());
            let g = gold(i, q.sql());
            let n = if rng.gen_bool(0.2) { 1 } else { rng.gen_range(2..=MAX_LIST) };
            let sqls = (0..n).map(|_| hypothesis(&q, rng)).collect();
            let l = list(&g.example_id, sqls);
            (g, l)
        })
        .collect()
}

/// Exact and execution match of one hypothesis, judged directly.
fn judge(world: &World, sql: &str, gold: &str) -> (bool, bool) {
    let em = match (parse_sql(sql, &world.schema), parse_sql(gold, &world.schema)) {
        (Ok(p), Ok(g)) => exact_set_match(&p, &g, &world.schema),
        _ => false,
    };
    let ex = execution_match(sql, gold, &world.db_path(), TIMEOUT).is_ok_and(|m| m.matched);
    (em, ex)
}

pub fn oracle_dominance() -> Verdict {
    let world = World::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let all = synthetic_lists(&mut rng);
    let opts = EvalOptions { db_root: Some(world.root().to_path_buf()), timeout: TIMEOUT, mode: ExecMode::default() };
    let mut corpora_ok = 0;
    let mut corpora = 0;
    let mut singles = 0;
    let mut singles_ok = 0;
    let mut independent_mismatch = Vec::new();
    let mut strictly_better = 0;
    for chunk in all.chunks(CORPUS_SIZE) {
        corpora += 1;
        let gold: Vec<GoldExample> = chunk.iter().map(|(g, _)| g.clone()).collect();
        let lists: BTreeMap<String, NBestList> = chunk.iter().map(|(g, l)| (g.example_id.clone(), l.clone())).collect();
        let r = oracle_analysis(&lists, &gold, &world.schemas, &opts);
        if r.oracle.em >= r.one_best.em && r.oracle.ex >= r.one_best.ex {
            corpora_ok += 1;
        }
        strictly_better += (r.oracle.em > r.one_best.em || r.oracle.ex > r.one_best.ex) as usize;
        for (o, (g, l)) in r.outcomes.iter().zip(chunk) {
            let judged: Vec<(bool, bool)> = l.hypotheses.iter().map(|h| judge(&world, &h.sql, &g.sql)).collect();
            let want = (
                judged[0].0,
                judged[0].1,
                judged.iter().any(|j| j.0),
                judged.iter().any(|j| j.1),
            );
            if (o.best_em, o.best_ex, o.oracle_em, o.oracle_ex) != want && independent_mismatch.len() < 3 {
                independent_mismatch.push(o.example_id.clone());
            }
            if o.list_size == 1 {
                singles += 1;
                singles_ok += (o.best_em == o.oracle_em && o.best_ex == o.oracle_ex) as usize;
            }
        }
    }
    let detail = format!(
        "{LISTS} lists in {corpora} corpora: oracle >= 1-best in {corpora_ok}/{corpora} ({strictly_better} strictly higher), \
         size-1 equality {singles_ok}/{singles}"
    );
    if corpora_ok == corpora && singles_ok == singles && independent_mismatch.is_empty() {
        Verdict::pass(format!("{detail}, per-list results match direct judgement"))
    } else {
        Verdict::fail(format!("{detail}; lists disagreeing with direct judgement: {independent_mismatch:?}"))
    }
}

struct Grounded {
    gold: &'static str,
    /// Same literal, different clause plan.
    other_plans: &'static [&'static str],
    values: &'static [&'static str],
    utterance: &'static str,
}

const GROUNDED: &[Grounded] = &[
    Grounded {
        gold: "SELECT Name FROM singer WHERE Country = '{v}'",
        other_plans: &[
            "SELECT Name FROM singer WHERE Country = '{v}' ORDER BY Age",
            "SELECT Name FROM singer WHERE Country = '{v}' LIMIT 1",
            "SELECT Name FROM singer WHERE Country = '{v}' UNION SELECT Name FROM singer",
        ],
        values: &["France", "Netherlands", "United States"],
        utterance: "which singers are from {v}",
    },
    Grounded {
        gold: "SELECT count(*) FROM singer WHERE Country = '{v}' AND Age > 30",
        other_plans: &[
            "SELECT Country, count(*) FROM singer WHERE Country = '{v}' GROUP BY Country",
            "SELECT count(*) FROM singer WHERE Country = '{v}' EXCEPT SELECT count(*) FROM singer",
        ],
        values: &["France", "Netherlands", "United States"],
        utterance: "how many singers from {v} are older than 30",
    },
    Grounded {
        gold: "SELECT Name, Capacity FROM stadium WHERE Location = '{v}' ORDER BY Capacity DESC",
        other_plans: &[
            "SELECT Name, Capacity FROM stadium WHERE Location = '{v}'",
            "SELECT Name, Capacity FROM stadium WHERE Location = '{v}' ORDER BY Capacity DESC LIMIT 1",
        ],
        values: &["Raith Rovers", "Ayr United", "East Fife", "Arbroath"],
        utterance: "stadiums of {v} by capacity",
    },
    Grounded {
        gold: "SELECT T2.concert_Name FROM stadium AS T1 JOIN concert AS T2 ON T1.Stadium_ID = T2.Stadium_ID WHERE T1.Name = '{v}'",
        other_plans: &[
            "SELECT T2.concert_Name FROM stadium AS T1 JOIN concert AS T2 ON T1.Stadium_ID = T2.Stadium_ID WHERE T1.Name = '{v}' ORDER BY T2.Year",
            "SELECT T2.concert_Name FROM stadium AS T1 JOIN concert AS T2 ON T1.Stadium_ID = T2.Stadium_ID WHERE T1.Name = '{v}' INTERSECT SELECT concert_Name FROM concert",
        ],
        values: &["Somerset Park", "Hampden Park", "Gayfield Park", "Forthbank Stadium"],
        utterance: "concerts held at {v}",
    },
    Grounded {
        gold: "SELECT Country, count(*) FROM singer WHERE Country != '{v}' GROUP BY Country HAVING count(*) > 0",
        other_plans: &[
            "SELECT Country, count(*) FROM singer WHERE Country != '{v}' GROUP BY Country",
            "SELECT Country FROM singer WHERE Country != '{v}'",
        ],
        values: &["France", "Netherlands"],
        utterance: "count singers per country other than {v}",
    },
];

const UNGROUNDED: &[&str] = &["Zzyzx", "Qwerty Downs", "Nowhere Land", "Xanadu"];

fn noisy_one_hot(sql: &str, world: &World, rng: &mut ChaCha8Rng) -> QueryPlanProbs {
    let plan = extract_query_plan(&parse_sql(sql, &world.schema).unwrap());
    let mut p = QueryPlanProbs::one_hot(&plan);
    for (x, on) in p.probs.iter_mut().zip(plan.flags) {
        *x = if on { rng.gen_range(0.6..=1.0) } else { rng.gen_range(0.0..0.4) };
    }
    p
}

/// Gold first whenever it alone has no violations and the best agreement.
fn gold_first(world: &World, rng: &mut ChaCha8Rng) -> Result<(usize, usize), String> {
    let cfg = RerankConfig::default();
    let AgreementRule::Count { threshold } = cfg.agreement else { unreachable!() };
    let mut first = 0;
    let mut gold_not_top_before = 0;
    for i in 0..RERANK_CASES {
        let g = GROUNDED.choose(rng).unwrap();
        let v = *g.values.choose(rng).unwrap();
        let gold = g.gold.replace("{v}", v);
        let utterance = g.utterance.replace("{v}", v);
        let window = [utterance.as_str()];
        let mut sqls = Vec::new();
        for _ in 0..rng.gen_range(2..=9) {
            let bad = *UNGROUNDED.choose(rng).unwrap();
            sqls.push(match rng.gen_range(0..3) {
                0 => g.gold.replace("{v}", bad),
                1 => g.other_plans.choose(rng).unwrap().replace("{v}", v),
                _ => g.other_plans.choose(rng).unwrap().replace("{v}", bad),
            });
        }
        let pos = rng.gen_range(0..=sqls.len());
        sqls.insert(pos, gold.clone());
        gold_not_top_before += (pos != 0) as usize;
        let probs = noisy_one_hot(&gold, world, rng);

        let key = |sql: &str| {
            let ast = parse_sql(sql, &world.schema).map_err(|e| format!("`{sql}`: {e}"))?;
            let sl = sl_score(&ast, &window, &world.schema, &world.index);
            Ok::<_, String>((sl.violations, qp_agreement(&probs, &extract_query_plan(&ast), threshold)))
        };
        let gold_key = key(&gold)?;
        for s in sqls.iter().filter(|s| **s != gold) {
            let k = key(s)?;
            if k.0 == 0 && k.1 >= gold_key.1 || gold_key.0 != 0 {
                return Err(format!("case {i}: gold {gold_key:?} is not uniquely best against `{s}` {k:?}"));
            }
        }
        let l = list(&format!("rr_{i}"), sqls);
        let (r, _) = rerank_list(&l, &world.schema, Some(&world.index), &window, Some(&probs), &cfg)
            .map_err(|e| e.to_string())?;
        first += (r.hypotheses[0].sql == gold) as usize;
    }
    Ok((first, gold_not_top_before))
}

/// With signals that score every hypothesis alike, the order and hence the
/// top-1 exact match do not move.
fn uninformative(world: &World, rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    let cfg = RerankConfig { agreement: AgreementRule::Weighted, ..RerankConfig::default() };
    let flat = QueryPlanProbs { probs: [0.5; 8] };
    let (mut em_before, mut em_after, mut same_order) = (0, 0, 0);
    let mut done = 0;
    while done < RERANK_CASES {
        let q = Query::of(BASES.choose(rng).unwrap());
        let n = rng.gen_range(1..=MAX_LIST);
        let sqls: Vec<String> = (0..n)
            .map(|_| hypothesis(&q, rng))
            .filter(|s| parse_sql(s, &world.schema).is_ok())
            .collect();
        if sqls.is_empty() {
            continue;
        }
        done += 1;
        let gold = parse_sql(&q.sql(), &world.schema).unwrap();
        let em = |sql: &str| exact_set_match(&parse_sql(sql, &world.schema).unwrap(), &gold, &world.schema);
        let l = list("flat", sqls);
        let (r, _) = rerank_list(&l, &world.schema, None, &[], Some(&flat), &cfg).unwrap();
        em_before += em(&l.hypotheses[0].sql) as usize;
        em_after += em(&r.hypotheses[0].sql) as usize;
        same_order += r.hypotheses.iter().map(|h| h.rank).eq(0..l.hypotheses.len()) as usize;
    }
    (em_before, em_after, same_order)
}

pub fn rerank_soundness() -> Verdict {
    let world = World::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (first, moved) = match gold_first(&world, &mut rng) {
        Ok(x) => x,
        Err(e) => return Verdict::fail(format!("fixture precondition broken: {e}")),
    };
    let (before, after, same) = uninformative(&world, &mut rng);
    let detail = format!(
        "gold first in {first}/{RERANK_CASES} ({moved} started below rank 0); uninformative signals: \
         top-1 EM {before} before, {after} after, order kept in {same}/{RERANK_CASES}"
    );
    if first == RERANK_CASES && before == after && same == RERANK_CASES {
        Verdict::pass(detail)
    } else {
        Verdict::fail(detail)
    }
}
