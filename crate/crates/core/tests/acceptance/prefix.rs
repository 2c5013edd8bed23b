//! Exhaustive comparison of the prefix checker with a completion oracle over
//! a small vocabulary.

use std::collections::{HashMap, HashSet};

use text2sql_core::schema::{ColumnType, DatabaseSchema};
use text2sql_core::sql::{parse_sql, parse_unbound, prefix_feasible, PrefixMode};

use crate::Verdict;

const VOCAB: [&str; 12] = ["select", "from", "where", "join", "t1", "t2", "a", "b", "x", ",", "=", "1"];
const IDS: [usize; 5] = [4, 5, 6, 7, 8];
const CLASS_ID: u8 = 4;
const CLASSES: u8 = 8;
/// Longest prefix handed to the checker.
const MAX_PREFIX: usize = 6;
/// Longest sentence enumerated by the oracle.
const MAX_SENTENCE: usize = 9;
const FULL_VOCAB_SENTENCE: usize = 6;

fn class_of(tok: usize) -> u8 {
    match tok {
        0..=3 => tok as u8,
        4..=8 => CLASS_ID,
        t => t as u8 - 4,
    }
}

fn class_token(c: u8) -> usize {
    match c {
        0..=3 => c as usize,
        CLASS_ID => 6,
        c => c as usize + 4,
    }
}

fn full_key(seq: &[usize]) -> u64 {
    seq.iter().fold(0u64, |k, &t| k * 13 + t as u64 + 1)
}

fn class_key(seq: &[u8]) -> u64 {
    seq.iter().fold(0u64, |k, &c| k * 9 + c as u64 + 1)
}

fn text(seq: &[usize]) -> String {
    seq.iter().map(|&t| VOCAB[t]).collect::<Vec<_>>().join(" ")
}

pub fn schema() -> DatabaseSchema {
    DatabaseSchema::from_parts(
        "p",
        &[("t1", &[("a", ColumnType::Number), ("b", ColumnType::Text)]), ("t2", &[("a", ColumnType::Number)])],
        &[],
    )
    .unwrap()
}

/// Calls `f` on every sequence of length `len` over `0..base`.
fn for_each_seq(base: usize, len: usize, mut f: impl FnMut(&[usize])) {
    let mut seq = vec![0usize; len];
    loop {
        f(&seq);
        let mut i = len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            seq[i] += 1;
            if seq[i] < base {
                break;
            }
            seq[i] = 0;
        }
    }
}

#[derive(Default)]
struct Oracle {
    /// Class-level prefixes (length up to `MAX_PREFIX`) of grammatical sentences.
    grammatical: HashSet<u64>,
    /// Full-vocabulary prefixes of schema-bound sentences, with the shortest
    /// sentence length that witnessed each.
    bound: HashMap<u64, usize>,
    sentences: usize,
    grammatical_sentences: usize,
    non_select_grammatical: usize,
    renaming_conflicts: Vec<String>,
}

impl Oracle {
    fn mark_bound(&mut self, seq: &[usize]) {
        for k in 0..=seq.len().min(MAX_PREFIX) {
            let e = self.bound.entry(full_key(&seq[..k])).or_insert(seq.len());
            *e = (*e).min(seq.len());
        }
    }

    fn mark_grammatical(&mut self, classes: &[u8]) {
        for k in 0..=classes.len().min(MAX_PREFIX) {
            self.grammatical.insert(class_key(&classes[..k]));
        }
    }

    /// Full vocabulary up to `FULL_VOCAB_SENTENCE` tokens: every sentence is
    /// parsed, and grammaticality must depend on token classes only.
    fn full_vocabulary(&mut self, schema: &DatabaseSchema) {
        let mut by_class: HashMap<u64, bool> = HashMap::new();
        for len in 1..=FULL_VOCAB_SENTENCE {
            for_each_seq(VOCAB.len(), len, |seq| {
                let s = text(seq);
                self.sentences += 1;
                let g = parse_unbound(&s).is_ok();
                let classes: Vec<u8> = seq.iter().map(|&t| class_of(t)).collect();
                let ck = class_key(&classes);
                match by_class.get(&ck) {
                    Some(&prev) if prev != g && self.renaming_conflicts.len() < 5 => self.renaming_conflicts.push(s.clone()),
                    Some(_) => {}
                    None => {
                        by_class.insert(ck, g);
                    }
                }
                if !g {
                    return;
                }
                self.grammatical_sentences += 1;
                if seq[0] != 0 {
                    self.non_select_grammatical += 1;
                }
                self.mark_grammatical(&classes);
                if parse_sql(&s, schema).is_ok() {
                    self.mark_bound(seq);
                }
            });
        }
    }

    /// Longer sentences at class level, starting with `select`. Each
    /// grammatical class sentence is expanded into identifiers only as far as
    /// needed to decide its unmarked prefixes.
    fn class_level(&mut self, schema: &DatabaseSchema, max_len: usize) {
        for len in FULL_VOCAB_SENTENCE + 1..=max_len {
            for_each_seq(CLASSES as usize, len - 1, |rest| {
                let mut classes = vec![0u8];
                classes.extend(rest.iter().map(|&c| c as u8));
                let rep: Vec<usize> = classes.iter().map(|&c| class_token(c)).collect();
                self.sentences += 1;
                if parse_unbound(&text(&rep)).is_err() {
                    return;
                }
                self.grammatical_sentences += 1;
                self.mark_grammatical(&classes);
                self.expand(&classes, schema);
            });
        }
    }

    fn expand(&mut self, classes: &[u8], schema: &DatabaseSchema) {
        let head: Vec<usize> = (0..MAX_PREFIX).filter(|&i| classes[i] == CLASS_ID).collect();
        let tail: Vec<usize> = (MAX_PREFIX..classes.len()).filter(|&i| classes[i] == CLASS_ID).collect();
        let mut seq: Vec<usize> = classes.iter().map(|&c| class_token(c)).collect();
        for_each_seq(IDS.len(), head.len(), |h| {
            for (&pos, &choice) in head.iter().zip(h) {
                seq[pos] = IDS[choice];
            }
            if self.bound.contains_key(&full_key(&seq[..MAX_PREFIX])) {
                return;
            }
            let mut found = false;
            for_each_seq(IDS.len(), tail.len(), |t| {
                if found {
                    return;
                }
                for (&pos, &choice) in tail.iter().zip(t) {
                    seq[pos] = IDS[choice];
                }
                if parse_sql(&text(&seq), schema).is_ok() {
                    found = true;
                }
            });
            if found {
                let s = seq.clone();
                self.mark_bound(&s);
            }
        });
    }
}

struct CheckerRun {
    prefixes: usize,
    gram_disagree: Vec<String>,
    gram_disagree_count: usize,
    bound_disagree: Vec<String>,
    bound_disagree_count: usize,
    monotonicity_violations: usize,
    longest_witness: usize,
}

fn run_checker(oracle: &Oracle, schema: &DatabaseSchema) -> CheckerRun {
    let mut run = CheckerRun {
        prefixes: 0,
        gram_disagree: Vec::new(),
        gram_disagree_count: 0,
        bound_disagree: Vec::new(),
        bound_disagree_count: 0,
        monotonicity_violations: 0,
        longest_witness: oracle.bound.values().copied().max().unwrap_or(0),
    };
    let mut parent: HashMap<u64, (bool, bool)> = HashMap::new();
    for len in 0..=MAX_PREFIX {
        let mut current: HashMap<u64, (bool, bool)> = HashMap::new();
        for_each_seq(VOCAB.len(), len, |seq| {
            let mut s = text(seq);
            if !seq.is_empty() {
                s.push(' ');
            }
            run.prefixes += 1;
            let g = prefix_feasible(&s, schema, PrefixMode::Grammatical);
            let b = prefix_feasible(&s, schema, PrefixMode::SchemaBound);
            let classes: Vec<u8> = seq.iter().map(|&t| class_of(t)).collect();
            let eg = oracle.grammatical.contains(&class_key(&classes));
            let eb = oracle.bound.contains_key(&full_key(seq));
            if g != eg {
                run.gram_disagree_count += 1;
                if run.gram_disagree.len() < 5 {
                    run.gram_disagree.push(format!("`{s}` checker={g} oracle={eg}"));
                }
            }
            if b != eb {
                run.bound_disagree_count += 1;
                if run.bound_disagree.len() < 5 {
                    run.bound_disagree.push(format!("`{s}` checker={b} oracle={eb}"));
                }
            }
            if let Some((pg, pb)) = seq.split_last().and_then(|(_, p)| parent.get(&full_key(p))) {
                if (g && !pg) || (b && !pb) {
                    run.monotonicity_violations += 1;
                }
            }
            if len < MAX_PREFIX {
                current.insert(full_key(seq), (g, b));
            }
        });
        parent = current;
    }
    run
}

pub fn criterion() -> Verdict {
    let schema = schema();
    let mut oracle = Oracle::default();
    oracle.full_vocabulary(&schema);
    oracle.class_level(&schema, MAX_SENTENCE);
    let run = run_checker(&oracle, &schema);
    let mut problems = Vec::new();
    if !oracle.renaming_conflicts.is_empty() {
        problems.push(format!("grammaticality depends on identifier choice: {:?}", oracle.renaming_conflicts));
    }
    if oracle.non_select_grammatical > 0 {
        problems.push(format!("{} grammatical sentences do not start with select", oracle.non_select_grammatical));
    }
    if run.gram_disagree_count > 0 {
        problems.push(format!("grammatical disagreements {}: {:?}", run.gram_disagree_count, run.gram_disagree));
    }
    if run.bound_disagree_count > 0 {
        problems.push(format!("schema-bound disagreements {}: {:?}", run.bound_disagree_count, run.bound_disagree));
    }
    if run.monotonicity_violations > 0 {
        problems.push(format!("{} prefixes feasible under an infeasible parent", run.monotonicity_violations));
    }
    let summary = format!(
        "{} prefixes of up to {MAX_PREFIX} tokens in 2 modes against {} oracle sentences of up to {MAX_SENTENCE} tokens \
         ({} grammatical); longest shortest bound witness {} tokens",
        run.prefixes, oracle.sentences, oracle.grammatical_sentences, run.longest_witness
    );
    if problems.is_empty() {
        Verdict::pass(summary)
    } else {
        Verdict::fail(format!("{summary}; {}", problems.join("; ")))
    }
}
