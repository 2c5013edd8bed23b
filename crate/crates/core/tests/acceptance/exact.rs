//! Exact-match and difficulty agreement with labels derived independently
//! from the reference scoring rules.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use text2sql_core::eval::{exact_set_match, hardness};
use text2sql_core::sql::parse_sql;

use crate::data::{data_root, gold_parity, DATA_ROOT_VAR};
use crate::world::{apply, schema, Edit, Query, BASES};
use crate::Verdict;

pub const PAIRS: usize = 500;
/// Minimum share of pairs whose match and difficulty both agree.
pub const MIN_AGREEMENT: f64 = 0.99;
const SEED: u64 = 4;

pub fn criterion() -> Verdict {
    let schema = schema();
    let mut problems = Vec::new();
    for (i, b) in BASES.iter().enumerate() {
        let sql = Query::of(b).sql();
        match parse_sql(&sql, &schema) {
            Ok(ast) if hardness(&ast) != b.hardness => {
                problems.push(format!("base {i} `{sql}` is {:?}, labelled {:?}", hardness(&ast), b.hardness))
            }
            Ok(ast) if !exact_set_match(&ast, &ast, &schema) => problems.push(format!("base {i} does not match itself")),
            Ok(_) => {}
            Err(e) => problems.push(format!("base {i} `{sql}`: {e}")),
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut agree = 0;
    let mut per_edit = [0usize; 4];
    let mut disagreements = Vec::new();
    let mut pairs = 0;
    while pairs < PAIRS {
        let b = BASES.choose(&mut rng).unwrap();
        let edit = *Edit::ALL.choose(&mut rng).unwrap();
        let base = Query::of(b);
        let Some(edited) = apply(&base, edit, &mut rng) else { continue };
        pairs += 1;
        per_edit[edit as usize] += 1;
        let (gold, pred) = (base.sql(), edited.sql());
        let result = parse_sql(&gold, &schema).and_then(|g| parse_sql(&pred, &schema).map(|p| (g, p)));
        let ok = match &result {
            Ok((g, p)) => {
                exact_set_match(p, g, &schema) == edit.preserves_match()
                    && hardness(p) == b.hardness
                    && hardness(g) == b.hardness
            }
            Err(_) => false,
        };
        if ok {
            agree += 1;
        } else if disagreements.len() < 5 {
            disagreements.push(format!("{}: `{pred}` vs `{gold}`", edit.name()));
        }
    }
    let rate = agree as f64 / PAIRS as f64;
    let mix: Vec<String> = Edit::ALL.iter().map(|e| format!("{} {}", e.name(), per_edit[*e as usize])).collect();
    let mut detail = format!(
        "{} labelled bases; perturbation agreement {agree}/{PAIRS} ({:.1}%, need {:.0}%) over {}",
        BASES.len(),
        100.0 * rate,
        100.0 * MIN_AGREEMENT,
        mix.join(", ")
    );
    if !disagreements.is_empty() {
        detail.push_str(&format!("; disagreements {disagreements:?}"));
    }
    if !problems.is_empty() || rate < MIN_AGREEMENT {
        return Verdict::fail(format!("{detail}; {}", problems.join("; ")));
    }
    if data_root().is_none() {
        return Verdict::blocked(format!("{detail}; gold-vs-gold parity needs {DATA_ROOT_VAR}"));
    }
    match gold_parity() {
        Ok(g) => Verdict::pass(format!("{detail}; {g}")),
        Err(e) => Verdict::fail(format!("{detail}; {e}")),
    }
}
