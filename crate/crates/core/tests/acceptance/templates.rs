//! Template digests under renaming and clause edits, and the unseen-template
//! resplit.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use text2sql_core::dialogue::{DatasetKind, Interaction, Turn};
use text2sql_core::par::ExecMode;
use text2sql_core::schema::DatabaseSchema;
use text2sql_core::splits::{cg_manifest, cg_resplit, Assignment};
use text2sql_core::sql::{parse_sql, prune_to_template};

use crate::gen::{self, edit_clause, fill, shape, ClauseEdit, Shape};
use crate::Verdict;

const TRIALS: usize = 1000;
const SEED: u64 = 8;
const POOL_INTERACTIONS: usize = 240;
const POOL_SHAPES: usize = 1200;
const DEV_FRACTION: f64 = 0.1;
const RESPLIT_SEEDS: [u64; 5] = [1, 2, 3, 42, 1234];

fn digest(sql: &str, schema: &DatabaseSchema) -> Result<u64, String> {
    parse_sql(sql, schema).map(|a| prune_to_template(&a).digest).map_err(|e| format!("`{sql}`: {e}"))
}

fn renaming_and_edits(schema: &DatabaseSchema, rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut renamed_equal = 0;
    let mut edited_differ = 0;
    let mut per_edit = [0usize; ClauseEdit::ALL.len()];
    let mut failures = Vec::new();
    for _ in 0..TRIALS {
        let s = shape(rng, 1);
        let (a, b) = (fill(&s, rng), fill(&s, rng));
        if digest(&a, schema)? == digest(&b, schema)? {
            renamed_equal += 1;
        } else if failures.len() < 3 {
            failures.push(format!("renaming changed the digest: `{a}` vs `{b}`"));
        }
    }
    let mut done = 0;
    while done < TRIALS {
        let s = shape(rng, 1);
        let e = *ClauseEdit::ALL.choose(rng).unwrap();
        let Some(t) = edit_clause(&s, e, rng) else { continue };
        done += 1;
        per_edit[ClauseEdit::ALL.iter().position(|x| *x == e).unwrap()] += 1;
        let (a, b) = (fill(&s, rng), fill(&t, rng));
        if digest(&a, schema)? != digest(&b, schema)? {
            edited_differ += 1;
        } else if failures.len() < 6 {
            failures.push(format!("{e:?} kept the digest: `{a}` vs `{b}`"));
        }
    }
    let detail = format!(
        "renamings {renamed_equal}/{TRIALS} same digest, clause edits {edited_differ}/{TRIALS} new digest (per edit {per_edit:?})"
    );
    if renamed_equal == TRIALS && edited_differ == TRIALS {
        Ok(detail)
    } else {
        Err(format!("{detail}; {failures:?}"))
    }
}

/// Interactions over a pool of shapes; low shape indices are drawn more
/// often, so templates repeat across interactions.
fn pool(rng: &mut ChaCha8Rng) -> Vec<Interaction> {
    let shapes: Vec<Shape> = (0..POOL_SHAPES).map(|_| shape(rng, 1)).collect();
    (0..POOL_INTERACTIONS)
        .map(|i| {
            let id = format!("pool_{i}");
            let turns = (1..=rng.gen_range(1..=4u32))
                .map(|t| {
                    let k = rng.gen_range(0..POOL_SHAPES).min(rng.gen_range(0..POOL_SHAPES));
                    Turn {
                        utterance: format!("question {t}"),
                        gold_sql: Some(fill(&shapes[k], rng)),
                        turn_index: t,
                        db_id: gen::DB_ID.to_string(),
                    }
                })
                .collect();
            Interaction { id, db_id: gen::DB_ID.to_string(), turns, kind: DatasetKind::Cosql }
        })
        .collect()
}

fn resplit(schema: &DatabaseSchema, rng: &mut ChaCha8Rng) -> Result<String, String> {
    let data = pool(rng);
    let schemas = BTreeMap::from([(gen::DB_ID.to_string(), schema.clone())]);
    let mut dev_examples = 0;
    let mut dev_interactions = 0;
    for seed in RESPLIT_SEEDS {
        let run = |mode| cg_resplit(&data, &schemas, seed, DEV_FRACTION, mode).map_err(|e| e.to_string());
        let first = run(ExecMode::Parallel)?;
        let again = run(ExecMode::Parallel)?;
        let sequential = run(ExecMode::Sequential)?;
        let m = cg_manifest(&first, seed, DEV_FRACTION);
        if m != cg_manifest(&again, seed, DEV_FRACTION) || m != cg_manifest(&sequential, seed, DEV_FRACTION) {
            return Err(format!("seed {seed}: manifests differ between runs"));
        }
        let mut train_digests = BTreeSet::new();
        let mut dev_digests = Vec::new();
        let mut by_interaction: BTreeMap<&str, BTreeSet<bool>> = BTreeMap::new();
        let gold: BTreeMap<String, &str> = data
            .iter()
            .flat_map(|i| i.examples().map(|e| (e.example_id.clone(), i.turns[e.turn_index as usize - 1].gold_sql.as_deref().unwrap())))
            .collect();
        for row in &first.rows {
            let d = digest(gold[&row.example_id], schema)?;
            if format!("{d:016x}") != row.template_digest {
                return Err(format!("seed {seed}: {} manifest digest disagrees", row.example_id));
            }
            by_interaction.entry(&row.interaction_id).or_default().insert(row.assignment == Assignment::Dev);
            match row.assignment {
                Assignment::Train => {
                    train_digests.insert(d);
                }
                Assignment::Dev => dev_digests.push((row.example_id.clone(), d)),
                a => return Err(format!("seed {seed}: unexpected assignment {a:?}")),
            }
        }
        if let Some((i, _)) = by_interaction.iter().find(|(_, a)| a.len() > 1) {
            return Err(format!("seed {seed}: interaction {i} is split across train and dev"));
        }
        let leaked: Vec<&String> = dev_digests.iter().filter(|(_, d)| train_digests.contains(d)).map(|(e, _)| e).collect();
        if !leaked.is_empty() || first.dev.is_empty() {
            return Err(format!("seed {seed}: {} dev examples have train templates: {leaked:?}", leaked.len()));
        }
        dev_examples += dev_digests.len();
        dev_interactions += first.dev.len();
    }
    Ok(format!(
        "resplit over {} seeds: {dev_interactions} dev interactions, {dev_examples} dev examples, all templates unseen, manifests byte-identical",
        RESPLIT_SEEDS.len()
    ))
}

pub fn criterion() -> Verdict {
    let schema = gen::schema();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let parts = [renaming_and_edits(&schema, &mut rng), resplit(&schema, &mut rng)];
    let text: Vec<String> = parts.iter().map(|p| p.clone().unwrap_or_else(|e| e)).collect();
    if parts.iter().all(Result::is_ok) {
        Verdict::pass(text.join("; "))
    } else {
        Verdict::fail(text.join("; "))
    }
}
