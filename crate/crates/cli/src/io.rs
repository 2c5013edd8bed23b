use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use text2sql_core::dialogue::{load_dataset_tagged, DatasetKind, Interaction, OfficialSplit};
use text2sql_core::schema::{load_schema_files, DatabaseSchema};

use crate::args::GlobalArgs;

/// Bad flags, missing inputs or unwritable outputs. Exit code 1.
#[derive(Debug)]
pub struct Validation(pub String);

impl fmt::Display for Validation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Validation {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Validation(msg.into()).into()
}

#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub path: PathBuf,
    /// Prefix of interaction ids.
    pub tag: String,
    pub official: Option<OfficialSplit>,
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Vec<Interaction>> {
        load_dataset_tagged(&self.path, self.kind, &self.tag).with_context(|| format!("loading {}", self.path.display()))
    }
}

/// `cosql-dev` resolved under the data root, or `KIND:PATH`.
pub fn resolve_dataset(spec: &str, global: &GlobalArgs) -> Result<DatasetSpec> {
    if let Some((k, p)) = spec.split_once(':') {
        let kind = DatasetKind::parse(k)
            .ok_or_else(|| invalid(format!("--dataset {spec}: unknown kind `{k}` (spider, sparc, cosql)")))?;
        let path = PathBuf::from(p);
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
        return Ok(DatasetSpec { kind, tag: format!("{kind}-{stem}"), path, official: None });
    }
    let official = OfficialSplit::parse(spec)
        .ok_or_else(|| invalid(format!("--dataset {spec}: expected a name like `cosql-dev` or KIND:PATH")))?;
    let root = global
        .data_root
        .as_ref()
        .ok_or_else(|| invalid(format!("--dataset {spec} needs --data-root or TEXT2SQL_DATA_ROOT")))?;
    Ok(DatasetSpec { kind: official.kind, path: official.data_file(root), tag: official.name(), official: Some(official) })
}

pub struct Inputs {
    pub datasets: Vec<DatasetSpec>,
    pub tables: Vec<PathBuf>,
    pub db_root: Option<PathBuf>,
}

/// Resolves datasets, schema files and the database root, and checks every
/// input path and output location before any work starts.
pub fn prepare(
    global: &GlobalArgs,
    specs: &[String],
    need_db: bool,
    extra_inputs: &[(&str, Option<&Path>)],
    outputs: &[(&str, Option<&Path>)],
    out_dirs: &[(&str, Option<&Path>)],
) -> Result<Inputs> {
    let datasets = specs.iter().map(|s| resolve_dataset(s, global)).collect::<Result<Vec<_>>>()?;
    let mut tables = global.tables.clone();
    if tables.is_empty() {
        let root = global.data_root.as_deref();
        for d in &datasets {
            if let (Some(o), Some(root)) = (d.official, root) {
                let t = o.tables_file(root);
                if !tables.contains(&t) {
                    tables.push(t);
                }
            }
        }
    }
    if tables.is_empty() {
        return Err(invalid("no schema file: pass --tables"));
    }
    let db_root = global.db_root.clone().or_else(|| {
        let root = global.data_root.as_deref()?;
        datasets.iter().find_map(|d| d.official).map(|o| o.db_root(root)).filter(|p| p.is_dir())
    });
    if need_db && db_root.is_none() {
        return Err(invalid("this command needs --db-root or TEXT2SQL_DB_ROOT"));
    }
    if let Some(r) = &db_root {
        if !r.is_dir() {
            return Err(invalid(format!("--db-root {}: not a directory", r.display())));
        }
    }
    for d in &datasets {
        require_file("--dataset", &d.path)?;
    }
    for t in &tables {
        require_file("--tables", t)?;
    }
    for (flag, p) in extra_inputs {
        if let Some(p) = p {
            require_file(flag, p)?;
        }
    }
    for (flag, p) in outputs {
        if let Some(p) = p {
            check_output(flag, p)?;
        }
    }
    for (flag, p) in out_dirs {
        if let Some(p) = p {
            if p.exists() && !p.is_dir() {
                return Err(invalid(format!("{flag} {}: exists and is not a directory", p.display())));
            }
            check_output(flag, &p.join("x"))?;
        }
    }
    Ok(Inputs { datasets, tables, db_root })
}

fn require_file(flag: &str, p: &Path) -> Result<()> {
    if !p.is_file() {
        return Err(invalid(format!("{flag} {}: no such file", p.display())));
    }
    Ok(())
}

fn check_output(flag: &str, p: &Path) -> Result<()> {
    let parent = parent_dir(p);
    let mut probe = parent;
    while !probe.exists() {
        match probe.parent() {
            Some(up) if !up.as_os_str().is_empty() => probe = up,
            _ => return Ok(()),
        }
    }
    if !probe.is_dir() {
        return Err(invalid(format!("{flag} {}: {} is not a directory", p.display(), probe.display())));
    }
    Ok(())
}

fn parent_dir(p: &Path) -> &Path {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    }
}

pub fn load_schemas(files: &[PathBuf]) -> Result<BTreeMap<String, DatabaseSchema>> {
    load_schema_files(files).context("loading schema files")
}

/// Writes `contents` to a temporary file beside `path`, then renames it into
/// place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = parent_dir(path);
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}
