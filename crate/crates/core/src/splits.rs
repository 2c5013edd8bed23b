//! Template inventories, the seen-template subset of a dev set, and the
//! unseen-template re-split of pooled data.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dialogue::{DatasetKind, GoldExample, Interaction};
use crate::par::{map_ordered, ExecMode};
use crate::schema::DatabaseSchema;
use crate::sql::{parse_sql, prune_to_template, SqlError};

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("{example_id}: {source}")]
    Parse {
        example_id: String,
        #[source]
        source: SqlError,
    },
    #[error("{example_id}: no schema for `{db_id}`")]
    MissingSchema { example_id: String, db_id: String },
    #[error("no template can be held out without emptying the training side")]
    InfeasibleSplit,
    #[error("dev fraction {0} is outside (0, 1)")]
    Fraction(f64),
}

fn digest_of(e: &GoldExample, schemas: &BTreeMap<String, DatabaseSchema>) -> Result<u64, SplitError> {
    let schema = schemas
        .get(&e.db_id)
        .ok_or_else(|| SplitError::MissingSchema { example_id: e.example_id.clone(), db_id: e.db_id.clone() })?;
    let ast = parse_sql(&e.sql, schema)
        .map_err(|source| SplitError::Parse { example_id: e.example_id.clone(), source })?;
    Ok(prune_to_template(&ast).digest)
}

/// Template digest of every example, in input order.
pub fn example_digests(
    examples: &[GoldExample],
    schemas: &BTreeMap<String, DatabaseSchema>,
    mode: ExecMode,
) -> Result<Vec<u64>, SplitError> {
    map_ordered(examples, mode, |e| digest_of(e, schemas)).into_iter().collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TemplateInventory {
    /// Digest → datasets it was seen in.
    pub digests: BTreeMap<u64, BTreeSet<DatasetKind>>,
}

impl TemplateInventory {
    pub fn contains(&self, digest: u64) -> bool {
        self.digests.contains_key(&digest)
    }

    pub fn len(&self) -> usize {
        self.digests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digests.is_empty()
    }
}

pub fn template_inventory(
    train: &[GoldExample],
    schemas: &BTreeMap<String, DatabaseSchema>,
    mode: ExecMode,
) -> Result<TemplateInventory, SplitError> {
    let digests = example_digests(train, schemas, mode)?;
    let mut inv = TemplateInventory::default();
    for (e, d) in train.iter().zip(digests) {
        inv.digests.entry(d).or_default().insert(e.kind);
    }
    Ok(inv)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZsgSplit {
    pub seen: Vec<GoldExample>,
    pub unseen: Vec<GoldExample>,
    /// Digest of each dev example, in input order.
    pub digests: Vec<u64>,
}

/// Partitions `dev` by whether each example's template is in `inv`.
pub fn zsg_subset(
    dev: &[GoldExample],
    inv: &TemplateInventory,
    schemas: &BTreeMap<String, DatabaseSchema>,
    mode: ExecMode,
) -> Result<ZsgSplit, SplitError> {
    let digests = example_digests(dev, schemas, mode)?;
    let (mut seen, mut unseen) = (Vec::new(), Vec::new());
    for (e, d) in dev.iter().zip(&digests) {
        if inv.contains(*d) {
            seen.push(e.clone());
        } else {
            unseen.push(e.clone());
        }
    }
    Ok(ZsgSplit { seen, unseen, digests })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Assignment {
    Train,
    Dev,
    Seen,
    Unseen,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestRow {
    pub example_id: String,
    pub interaction_id: String,
    pub assignment: Assignment,
    pub template_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSplit {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub rows: Vec<ManifestRow>,
}

struct Components {
    parent: Vec<usize>,
}

impl Components {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = x;
        while self.parent[c] != r {
            let n = self.parent[c];
            self.parent[c] = r;
            c = n;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Holds out whole interactions whose templates occur nowhere else.
///
/// Interactions sharing a template are tied together, so the units are the
/// connected components of the interaction-template graph. Units are taken
/// for dev smallest first, ties broken by a seeded shuffle, until dev holds
/// at least `ceil(dev_fraction * interactions)` interactions. A unit that
/// would leave train empty is skipped.
pub fn cg_resplit(
    data: &[Interaction],
    schemas: &BTreeMap<String, DatabaseSchema>,
    seed: u64,
    dev_fraction: f64,
    mode: ExecMode,
) -> Result<CgSplit, SplitError> {
    if !(dev_fraction > 0.0 && dev_fraction < 1.0) {
        return Err(SplitError::Fraction(dev_fraction));
    }
    let per: Vec<Vec<GoldExample>> = data.iter().map(|i| i.examples().collect()).collect();
    let flat: Vec<GoldExample> = per.iter().flatten().cloned().collect();
    let digests = example_digests(&flat, schemas, mode)?;

    let n = data.len();
    let mut comp = Components { parent: (0..n).collect() };
    let mut owner: BTreeMap<u64, usize> = BTreeMap::new();
    let mut k = 0;
    for (i, exs) in per.iter().enumerate() {
        for _ in exs {
            match owner.get(&digests[k]) {
                Some(&j) => comp.union(i, j),
                None => {
                    owner.insert(digests[k], i);
                }
            }
            k += 1;
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = comp.find(i);
        groups.entry(r).or_default().push(i);
    }
    let mut units: Vec<Vec<usize>> = groups.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    units.shuffle(&mut rng);
    units.sort_by_key(Vec::len);

    let target = (dev_fraction * n as f64).ceil() as usize;
    let mut in_dev = vec![false; n];
    let mut dev_count = 0;
    for u in &units {
        if dev_count >= target {
            break;
        }
        if dev_count + u.len() >= n {
            continue;
        }
        for &i in u {
            in_dev[i] = true;
        }
        dev_count += u.len();
    }
    if dev_count == 0 {
        return Err(SplitError::InfeasibleSplit);
    }

    let mut split = CgSplit { train: Vec::new(), dev: Vec::new(), rows: Vec::new() };
    let mut k = 0;
    for (i, inter) in data.iter().enumerate() {
        let a = if in_dev[i] { Assignment::Dev } else { Assignment::Train };
        if in_dev[i] {
            split.dev.push(inter.id.clone());
        } else {
            split.train.push(inter.id.clone());
        }
        for e in &per[i] {
            split.rows.push(ManifestRow {
                example_id: e.example_id.clone(),
                interaction_id: inter.id.clone(),
                assignment: a,
                template_digest: format!("{:016x}", digests[k]),
            });
            k += 1;
        }
    }
    Ok(split)
}

/// JSON lines: a header object, then one row per example.
pub fn write_manifest(header: &serde_json::Value, rows: &[ManifestRow]) -> String {
    let mut out = header.to_string();
    out.push('\n');
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("rows serialize"));
        out.push('\n');
    }
    out
}

/// ZSG assignment is deterministic; `seed` is recorded so every split
/// manifest carries one.
pub fn zsg_manifest(split: &ZsgSplit, dev: &[GoldExample], inventory_size: usize, seed: u64) -> String {
    let seen: BTreeSet<&str> = split.seen.iter().map(|e| e.example_id.as_str()).collect();
    let rows: Vec<ManifestRow> = dev
        .iter()
        .zip(&split.digests)
        .map(|(e, d)| ManifestRow {
            example_id: e.example_id.clone(),
            interaction_id: e.interaction_id.clone(),
            assignment: if seen.contains(e.example_id.as_str()) { Assignment::Seen } else { Assignment::Unseen },
            template_digest: format!("{d:016x}"),
        })
        .collect();
    let header = serde_json::json!({
        "manifest": "zsg",
        "seed": seed,
        "inventory_templates": inventory_size,
        "seen": split.seen.len(),
        "unseen": split.unseen.len(),
    });
    write_manifest(&header, &rows)
}

pub fn cg_manifest(split: &CgSplit, seed: u64, dev_fraction: f64) -> String {
    let header = serde_json::json!({
        "manifest": "cg",
        "seed": seed,
        "dev_fraction": dev_fraction,
        "train_interactions": split.train.len(),
        "dev_interactions": split.dev.len(),
    });
    write_manifest(&header, &split.rows)
}
