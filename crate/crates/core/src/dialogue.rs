//! Spider, SParC and CoSQL ingestion, model-input serialization and the
//! multi-task training mixture.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{ContentIndex, DatabaseSchema};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("record {record}: {message}")]
    Format { record: usize, message: String },
    #[error("dataset `{0}` is empty")]
    EmptyDataset(String),
    #[error("no context label for {interaction_id} turn {turn_index}")]
    Coverage { interaction_id: String, turn_index: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Spider,
    Sparc,
    Cosql,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Spider => "spider",
            DatasetKind::Sparc => "sparc",
            DatasetKind::Cosql => "cosql",
        }
    }

    pub fn parse(s: &str) -> Option<DatasetKind> {
        match s.to_ascii_lowercase().as_str() {
            "spider" => Some(DatasetKind::Spider),
            "sparc" => Some(DatasetKind::Sparc),
            "cosql" => Some(DatasetKind::Cosql),
            _ => None,
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Turn {
    pub utterance: String,
    /// `None` for turns without a query.
    pub gold_sql: Option<String>,
    /// 1-based.
    pub turn_index: u32,
    pub db_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interaction {
    pub id: String,
    pub db_id: String,
    pub turns: Vec<Turn>,
    pub kind: DatasetKind,
}

/// One turn with a gold query, the unit of evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldExample {
    pub example_id: String,
    pub interaction_id: String,
    pub turn_index: u32,
    pub db_id: String,
    pub sql: String,
    pub kind: DatasetKind,
}

pub fn example_id(interaction_id: &str, turn_index: u32) -> String {
    format!("{interaction_id}_t{turn_index}")
}

impl Interaction {
    pub fn examples(&self) -> impl Iterator<Item = GoldExample> + '_ {
        self.turns.iter().filter_map(move |t| {
            t.gold_sql.as_ref().map(|sql| GoldExample {
                example_id: example_id(&self.id, t.turn_index),
                interaction_id: self.id.clone(),
                turn_index: t.turn_index,
                db_id: self.db_id.clone(),
                sql: sql.clone(),
                kind: self.kind,
            })
        })
    }
}

pub fn gold_examples(data: &[Interaction]) -> Vec<GoldExample> {
    data.iter().flat_map(|i| i.examples()).collect()
}

#[derive(Deserialize)]
struct RawSpider {
    db_id: String,
    query: String,
    question: String,
}

#[derive(Deserialize)]
struct RawDialogue {
    database_id: String,
    interaction: Vec<RawTurn>,
}

#[derive(Deserialize)]
struct RawTurn {
    utterance: String,
    #[serde(default)]
    query: Option<String>,
}

fn parse_records<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, DataError> {
    let values: Vec<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| DataError::Format { record: 0, message: e.to_string() })?;
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| serde_json::from_value(v).map_err(|e| DataError::Format { record: i, message: e.to_string() }))
        .collect()
}

/// Parses an official dataset file. Interaction ids are `{tag}_{i}`.
pub fn parse_dataset(text: &str, kind: DatasetKind, tag: &str) -> Result<Vec<Interaction>, DataError> {
    match kind {
        DatasetKind::Spider => Ok(parse_records::<RawSpider>(text)?
            .into_iter()
            .enumerate()
            .map(|(i, r)| Interaction {
                id: format!("{tag}_{i}"),
                db_id: r.db_id.clone(),
                turns: vec![Turn { utterance: r.question, gold_sql: Some(r.query), turn_index: 1, db_id: r.db_id }],
                kind,
            })
            .collect()),
        DatasetKind::Sparc | DatasetKind::Cosql => {
            let raws = parse_records::<RawDialogue>(text)?;
            let mut out = Vec::with_capacity(raws.len());
            for (i, r) in raws.into_iter().enumerate() {
                if r.interaction.is_empty() {
                    return Err(DataError::Format { record: i, message: "interaction has no turns".into() });
                }
                let turns = r
                    .interaction
                    .into_iter()
                    .enumerate()
                    .map(|(j, t)| Turn {
                        utterance: t.utterance,
                        gold_sql: t.query.filter(|q| !q.trim().is_empty()),
                        turn_index: j as u32 + 1,
                        db_id: r.database_id.clone(),
                    })
                    .collect();
                out.push(Interaction { id: format!("{tag}_{i}"), db_id: r.database_id, turns, kind });
            }
            Ok(out)
        }
    }
}

pub fn load_dataset(path: &Path, kind: DatasetKind) -> Result<Vec<Interaction>, DataError> {
    load_dataset_tagged(path, kind, kind.as_str())
}

pub fn load_dataset_tagged(path: &Path, kind: DatasetKind, tag: &str) -> Result<Vec<Interaction>, DataError> {
    parse_dataset(&std::fs::read_to_string(path)?, kind, tag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Dev,
}

/// A dataset file in the official release layout under a common data root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct OfficialSplit {
    pub kind: DatasetKind,
    pub split: SplitName,
}

impl OfficialSplit {
    /// Parses names such as `cosql-dev` or `spider-train`.
    pub fn parse(name: &str) -> Option<OfficialSplit> {
        let (k, s) = name.rsplit_once('-')?;
        let split = match s.to_ascii_lowercase().as_str() {
            "train" => SplitName::Train,
            "dev" => SplitName::Dev,
            _ => return None,
        };
        Some(OfficialSplit { kind: DatasetKind::parse(k)?, split })
    }

    pub fn name(&self) -> String {
        format!("{}-{}", self.kind, if self.split == SplitName::Train { "train" } else { "dev" })
    }

    fn base(kind: DatasetKind) -> &'static str {
        match kind {
            DatasetKind::Spider => "spider",
            DatasetKind::Sparc => "sparc",
            DatasetKind::Cosql => "cosql_dataset",
        }
    }

    pub fn data_file(&self, data_root: &Path) -> PathBuf {
        let file = match (self.kind, self.split) {
            (DatasetKind::Spider, SplitName::Train) => "train_spider.json",
            (DatasetKind::Spider, SplitName::Dev) => "dev.json",
            (DatasetKind::Sparc, SplitName::Train) => "train.json",
            (DatasetKind::Sparc, SplitName::Dev) => "dev.json",
            (DatasetKind::Cosql, SplitName::Train) => "sql_state_tracking/cosql_train.json",
            (DatasetKind::Cosql, SplitName::Dev) => "sql_state_tracking/cosql_dev.json",
        };
        data_root.join(Self::base(self.kind)).join(file)
    }

    pub fn tables_file(&self, data_root: &Path) -> PathBuf {
        data_root.join(Self::base(self.kind)).join("tables.json")
    }

    pub fn db_root(&self, data_root: &Path) -> PathBuf {
        data_root.join(Self::base(self.kind)).join("database")
    }

    pub fn load(&self, data_root: &Path) -> Result<Vec<Interaction>, DataError> {
        load_dataset_tagged(&self.data_file(data_root), self.kind, &self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DatasetCounts {
    pub interactions: usize,
    pub turns: usize,
    pub sql_turns: usize,
}

pub fn dataset_counts(data: &[Interaction]) -> DatasetCounts {
    DatasetCounts {
        interactions: data.len(),
        turns: data.iter().map(|i| i.turns.len()).sum(),
        sql_turns: data.iter().flat_map(|i| &i.turns).filter(|t| t.gold_sql.is_some()).count(),
    }
}

pub const TURN_SEP: &str = " || ";
pub const BLOCK_SEP: &str = " | ";
pub const NAME_SEP: &str = " : ";
pub const MAX_VALUES_PER_COLUMN: usize = 4;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SerializedExample {
    pub input_text: String,
    pub target_sql: String,
    pub example_id: String,
    pub db_id: String,
}

#[derive(Debug, Clone, Default)]
pub struct SerializeOptions {
    /// Prompt word; defaults to the dataset kind.
    pub prompt: Option<String>,
    /// Whitespace-token budget for the utterance window. The current turn is
    /// always kept.
    pub max_context_tokens: Option<usize>,
    pub with_content: bool,
}

/// Escapes `\` and `|` so that separators can be found again.
pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        if ch == '\\' || ch == '|' {
            out.push('\\');
        }
        out.push(ch);
    }
    out
}

pub fn unescape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(ch) = chars.next() {
        if ch == '\\' {
            if let Some(next) = chars.next() {
                out.push(next);
                continue;
            }
        }
        out.push(ch);
    }
    out
}

/// Splits at unescaped occurrences of `sep`.
fn split_unescaped<'a>(text: &'a str, sep: &str) -> Vec<&'a str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut start, mut i) = (0, 0);
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            i += 2;
            continue;
        }
        if text[i..].starts_with(sep) {
            out.push(&text[start..i]);
            i += sep.len();
            start = i;
        } else {
            i += 1;
        }
    }
    out.push(&text[start.min(text.len())..]);
    out
}

/// Utterances of the window ending at turn position `pos`, newest first.
pub fn utterance_window(interaction: &Interaction, pos: usize, max_tokens: Option<usize>) -> Vec<&str> {
    let mut out = Vec::new();
    let mut used = 0;
    for t in interaction.turns[..=pos].iter().rev() {
        let n = t.utterance.split_whitespace().count();
        if !out.is_empty() && max_tokens.is_some_and(|cap| used + n > cap) {
            break;
        }
        used += n;
        out.push(t.utterance.as_str());
    }
    out
}

fn is_numeric(s: &str) -> bool {
    s.trim().parse::<f64>().is_ok()
}

/// Builds the model input for the turn at position `pos` (0-based) of
/// `interaction`.
pub fn serialize_input(
    interaction: &Interaction,
    pos: usize,
    schema: &DatabaseSchema,
    index: Option<&ContentIndex>,
    opts: &SerializeOptions,
) -> SerializedExample {
    let turn = &interaction.turns[pos];
    let window = utterance_window(interaction, pos, opts.max_context_tokens);
    let lowered: Vec<String> = window.iter().map(|u| u.to_lowercase()).collect();
    let prompt = opts.prompt.clone().unwrap_or_else(|| interaction.kind.as_str().to_string());

    let mut s = String::new();
    s.push_str(&prompt);
    s.push_str(NAME_SEP);
    let utts: Vec<String> = window.iter().map(|u| escape(u.trim())).collect();
    s.push_str(&utts.join(TURN_SEP));
    s.push_str(BLOCK_SEP);
    s.push_str(&escape(&schema.db_id));
    for t in &schema.tables {
        s.push_str(BLOCK_SEP);
        s.push_str(&escape(&t.name.to_lowercase()));
        s.push_str(NAME_SEP);
        let cols: Vec<String> = t
            .columns
            .iter()
            .map(|c| {
                let mut col = escape(&c.name.to_lowercase());
                if let (true, Some(idx)) = (opts.with_content, index) {
                    let vals: Vec<String> = idx
                        .text_values(&t.name, &c.name)
                        .filter(|v| !v.trim().is_empty() && !is_numeric(v))
                        .filter(|v| {
                            let v = v.to_lowercase();
                            lowered.iter().any(|u| u.contains(&v))
                        })
                        .take(MAX_VALUES_PER_COLUMN)
                        .map(escape)
                        .collect();
                    if !vals.is_empty() {
                        col.push_str(" ( ");
                        col.push_str(&vals.join(" , "));
                        col.push_str(" )");
                    }
                }
                col
            })
            .collect();
        s.push_str(&cols.join(" , "));
    }
    SerializedExample {
        input_text: s,
        target_sql: turn.gold_sql.clone().unwrap_or_default(),
        example_id: example_id(&interaction.id, turn.turn_index),
        db_id: interaction.db_id.clone(),
    }
}

/// Serializes every turn that has a gold query.
pub fn serialize_interaction(
    interaction: &Interaction,
    schema: &DatabaseSchema,
    index: Option<&ContentIndex>,
    opts: &SerializeOptions,
) -> Vec<SerializedExample> {
    (0..interaction.turns.len())
        .filter(|&p| interaction.turns[p].gold_sql.is_some())
        .map(|p| serialize_input(interaction, p, schema, index, opts))
        .collect()
}

/// `(prompt, utterances newest first, db_id)` recovered from an input text.
pub fn parse_serialized(input: &str) -> Option<(String, Vec<String>, String)> {
    let (prompt, rest) = input.split_once(NAME_SEP)?;
    let blocks = split_unescaped(rest, BLOCK_SEP);
    if blocks.len() < 2 {
        return None;
    }
    let utts = split_unescaped(blocks[0], TURN_SEP).into_iter().map(unescape).collect();
    Some((prompt.to_string(), utts, unescape(blocks[1])))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MixRecord {
    pub input_text: String,
    pub target_sql: String,
    pub example_id: String,
    pub db_id: String,
    pub dataset: DatasetKind,
}

/// Upsamples each dataset to its weighted share of the largest one, then
/// shuffles everything with `seed`.
///
/// With weights `w` and sizes `n`, dataset `i` contributes
/// `round(w_i * max_j(n_j / w_j))` examples: whole copies first, then a
/// seeded sample of the remainder.
pub fn build_mt_mixture(
    datasets: &[(DatasetKind, Vec<SerializedExample>)],
    weights: Option<&[f64]>,
    seed: u64,
) -> Result<Vec<MixRecord>, DataError> {
    if datasets.is_empty() {
        return Err(DataError::EmptyDataset("<none>".into()));
    }
    if let Some((kind, _)) = datasets.iter().find(|(_, v)| v.is_empty()) {
        return Err(DataError::EmptyDataset(kind.to_string()));
    }
    let w: Vec<f64> = match weights {
        Some(w) if w.len() == datasets.len() && w.iter().all(|x| *x > 0.0 && x.is_finite()) => w.to_vec(),
        Some(_) => {
            return Err(DataError::Format { record: 0, message: "one positive weight per dataset expected".into() })
        }
        None => vec![1.0; datasets.len()],
    };
    let scale = datasets.iter().zip(&w).map(|((_, v), w)| v.len() as f64 / w).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for ((kind, exs), wi) in datasets.iter().zip(&w) {
        let target = (wi * scale).round() as usize;
        let mut take = |e: &SerializedExample| {
            out.push(MixRecord {
                input_text: e.input_text.clone(),
                target_sql: e.target_sql.clone(),
                example_id: e.example_id.clone(),
                db_id: e.db_id.clone(),
                dataset: *kind,
            })
        };
        for _ in 0..target / exs.len() {
            exs.iter().for_each(&mut take);
        }
        let mut idx: Vec<usize> = (0..exs.len()).collect();
        idx.shuffle(&mut rng);
        let mut rest = idx[..target % exs.len()].to_vec();
        rest.sort_unstable();
        rest.into_iter().for_each(|i| take(&exs[i]));
    }
    out.shuffle(&mut rng);
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("records serialize"));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextLabel {
    Independent,
    Dependent,
}

impl ContextLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ContextLabel::Independent => "independent",
            ContextLabel::Dependent => "dependent",
        }
    }
}

pub type ContextAnnotations = BTreeMap<(String, u32), ContextLabel>;

#[derive(Deserialize)]
struct RawAnnotation {
    interaction_id: String,
    turn_index: u32,
    label: ContextLabel,
}

pub fn parse_context_annotations(text: &str) -> Result<ContextAnnotations, DataError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: RawAnnotation =
            serde_json::from_str(line).map_err(|e| DataError::Format { record: i + 1, message: e.to_string() })?;
        let key = (r.interaction_id, r.turn_index);
        if out.contains_key(&key) {
            return Err(DataError::Format {
                record: i + 1,
                message: format!("duplicate label for {} turn {}", key.0, key.1),
            });
        }
        out.insert(key, r.label);
    }
    Ok(out)
}

/// Reads annotations and checks that every evaluated turn has a label.
pub fn load_context_annotations(path: &Path, evaluated: &[GoldExample]) -> Result<ContextAnnotations, DataError> {
    let ann = parse_context_annotations(&std::fs::read_to_string(path)?)?;
    check_coverage(&ann, evaluated)?;
    Ok(ann)
}

pub fn check_coverage(ann: &ContextAnnotations, evaluated: &[GoldExample]) -> Result<(), DataError> {
    let mut seen = BTreeSet::new();
    for e in evaluated {
        let key = (e.interaction_id.clone(), e.turn_index);
        if !ann.contains_key(&key) && seen.insert(key.clone()) {
            return Err(DataError::Coverage { interaction_id: key.0, turn_index: key.1 });
        }
    }
    Ok(())
}
