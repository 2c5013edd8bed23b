//! Database schemas (from the official tables file) and per-database content
//! indexes used for value grounding.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::Deserialize;
use thiserror::Error;

/// Text columns with at most this many distinct values are categorical.
pub const DEFAULT_CATEGORICAL_THRESHOLD: usize = 20;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("malformed tables file: {0}")]
    Format(String),
    #[error("database `{0}` appears more than once")]
    DuplicateDb(String),
    #[error("no database file for `{db_id}` at {path}")]
    MissingDatabase { db_id: String, path: PathBuf },
    #[error("query failed on `{db_id}`: {source}")]
    Query {
        db_id: String,
        #[source]
        source: rusqlite::Error,
    },
    #[error("unknown column {table}.{column}")]
    UnknownColumn { table: String, column: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Text,
    Number,
    Time,
    Boolean,
    Others,
}

impl ColumnType {
    pub fn from_declared(s: &str) -> ColumnType {
        match s.to_ascii_lowercase().as_str() {
            "text" => ColumnType::Text,
            "number" => ColumnType::Number,
            "time" => ColumnType::Time,
            "boolean" => ColumnType::Boolean,
            _ => ColumnType::Others,
        }
    }

    /// Maps an SQLite declared column type to the coarse categories.
    pub fn from_sqlite(decl: &str) -> ColumnType {
        let d = decl.to_ascii_lowercase();
        if d.contains("char") || d.contains("text") || d.contains("clob") || d.contains("string") {
            ColumnType::Text
        } else if d.contains("date") || d.contains("time") || d.contains("year") {
            ColumnType::Time
        } else if d.contains("bool") || d == "bit" {
            ColumnType::Boolean
        } else if d.contains("int")
            || d.contains("real")
            || d.contains("floa")
            || d.contains("doub")
            || d.contains("num")
            || d.contains("dec")
        {
            ColumnType::Number
        } else if d.is_empty() {
            ColumnType::Others
        } else {
            ColumnType::Text
        }
    }
}

#[derive(Debug, Clone)]
pub struct Column {
    /// Name as stored in the database.
    pub name: String,
    /// Natural-language name from the tables file.
    pub display: String,
    pub ty: ColumnType,
    /// Index in the tables file's flat column list (0 is `*`).
    pub global_id: usize,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub display: String,
    pub columns: Vec<Column>,
}

/// `(table, column)` by name.
pub type ColumnRef<'a> = (&'a str, &'a str);

#[derive(Debug, Clone)]
pub struct DatabaseSchema {
    pub db_id: String,
    pub tables: Vec<Table>,
    /// Global column ids.
    pub primary_keys: Vec<usize>,
    /// `(from, to)` global column ids.
    pub foreign_keys: Vec<(usize, usize)>,
    by_table: HashMap<String, usize>,
    by_global: HashMap<usize, (usize, usize)>,
}

impl DatabaseSchema {
    /// Builds a schema from `(table, [(column, type)])` lists. Foreign keys
    /// are given as `((table, column), (table, column))`.
    pub fn from_parts(
        db_id: &str,
        tables: &[(&str, &[(&str, ColumnType)])],
        foreign_keys: &[(ColumnRef, ColumnRef)],
    ) -> Result<DatabaseSchema, SchemaError> {
        let mut global = 1;
        let mut out_tables = Vec::new();
        for (tname, cols) in tables {
            let mut columns = Vec::new();
            for (cname, ty) in cols.iter() {
                columns.push(Column {
                    name: cname.to_string(),
                    display: cname.replace('_', " ").to_lowercase(),
                    ty: *ty,
                    global_id: global,
                });
                global += 1;
            }
            out_tables.push(Table {
                name: tname.to_string(),
                display: tname.replace('_', " ").to_lowercase(),
                columns,
            });
        }
        let mut schema = DatabaseSchema {
            db_id: db_id.to_string(),
            tables: out_tables,
            primary_keys: Vec::new(),
            foreign_keys: Vec::new(),
            by_table: HashMap::new(),
            by_global: HashMap::new(),
        };
        schema.index()?;
        for ((t1, c1), (t2, c2)) in foreign_keys {
            let a = schema.column_in_table(t1, c1).ok_or_else(|| {
                SchemaError::Format(format!("foreign key references missing column {t1}.{c1}"))
            })?;
            let b = schema.column_in_table(t2, c2).ok_or_else(|| {
                SchemaError::Format(format!("foreign key references missing column {t2}.{c2}"))
            })?;
            let pair = (a.global_id, b.global_id);
            schema.foreign_keys.push(pair);
        }
        Ok(schema)
    }

    fn index(&mut self) -> Result<(), SchemaError> {
        if self.tables.is_empty() {
            return Err(SchemaError::Format(format!("database `{}` has no tables", self.db_id)));
        }
        self.by_table.clear();
        self.by_global.clear();
        for (ti, t) in self.tables.iter().enumerate() {
            if self.by_table.insert(t.name.to_lowercase(), ti).is_some() {
                return Err(SchemaError::Format(format!(
                    "duplicate table `{}` in `{}`",
                    t.name, self.db_id
                )));
            }
            let mut seen = BTreeSet::new();
            for (ci, c) in t.columns.iter().enumerate() {
                if !seen.insert(c.name.to_lowercase()) {
                    return Err(SchemaError::Format(format!(
                        "duplicate column `{}.{}` in `{}`",
                        t.name, c.name, self.db_id
                    )));
                }
                self.by_global.insert(c.global_id, (ti, ci));
            }
        }
        Ok(())
    }

    pub fn table_by_name(&self, name: &str) -> Option<&Table> {
        self.by_table.get(&name.to_lowercase()).map(|&i| &self.tables[i])
    }

    pub fn column_in_table(&self, table: &str, column: &str) -> Option<&Column> {
        let t = self.table_by_name(table)?;
        t.columns.iter().find(|c| c.name.eq_ignore_ascii_case(column))
    }

    /// `(table, column)` for a global column id, lowercased.
    pub fn column_by_global(&self, id: usize) -> Option<(String, String)> {
        let &(ti, ci) = self.by_global.get(&id)?;
        let t = &self.tables[ti];
        Some((t.name.to_lowercase(), t.columns[ci].name.to_lowercase()))
    }

    /// Whether any table has a column with this name.
    pub fn has_column_anywhere(&self, column: &str) -> bool {
        self.tables.iter().any(|t| t.columns.iter().any(|c| c.name.eq_ignore_ascii_case(column)))
    }
}

#[derive(Deserialize)]
struct RawDb {
    db_id: String,
    table_names_original: Vec<String>,
    #[serde(default)]
    table_names: Vec<String>,
    column_names_original: Vec<(i64, String)>,
    #[serde(default)]
    column_names: Vec<(i64, String)>,
    column_types: Vec<String>,
    #[serde(default)]
    primary_keys: Vec<KeyEntry>,
    #[serde(default)]
    foreign_keys: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum KeyEntry {
    One(usize),
    Many(Vec<usize>),
}

fn schema_from_raw(raw: RawDb) -> Result<DatabaseSchema, SchemaError> {
    let fmt = |m: String| SchemaError::Format(format!("{}: {m}", raw.db_id));
    if raw.table_names_original.is_empty() {
        return Err(fmt("empty table list".into()));
    }
    if raw.column_types.len() != raw.column_names_original.len() {
        return Err(fmt("column_types and column_names_original differ in length".into()));
    }
    let mut tables: Vec<Table> = raw
        .table_names_original
        .iter()
        .enumerate()
        .map(|(i, n)| Table {
            name: n.clone(),
            display: raw.table_names.get(i).cloned().unwrap_or_else(|| n.to_lowercase()),
            columns: Vec::new(),
        })
        .collect();
    for (gid, (tidx, name)) in raw.column_names_original.iter().enumerate() {
        if *tidx < 0 {
            continue;
        }
        let t = tables
            .get_mut(*tidx as usize)
            .ok_or_else(|| fmt(format!("column `{name}` points at missing table {tidx}")))?;
        t.columns.push(Column {
            name: name.clone(),
            display: raw
                .column_names
                .get(gid)
                .map(|(_, d)| d.clone())
                .unwrap_or_else(|| name.to_lowercase()),
            ty: ColumnType::from_declared(&raw.column_types[gid]),
            global_id: gid,
        });
    }
    let ncols = raw.column_names_original.len();
    let check = |id: usize| -> Result<usize, SchemaError> {
        if id == 0 || id >= ncols {
            Err(fmt(format!("key references missing column id {id}")))
        } else {
            Ok(id)
        }
    };
    let mut primary_keys = Vec::new();
    for k in &raw.primary_keys {
        match k {
            KeyEntry::One(i) => primary_keys.push(check(*i)?),
            KeyEntry::Many(v) => {
                for i in v {
                    primary_keys.push(check(*i)?);
                }
            }
        }
    }
    let mut foreign_keys = Vec::new();
    for &(a, b) in &raw.foreign_keys {
        foreign_keys.push((check(a)?, check(b)?));
    }
    let mut schema = DatabaseSchema {
        db_id: raw.db_id.clone(),
        tables,
        primary_keys,
        foreign_keys,
        by_table: HashMap::new(),
        by_global: HashMap::new(),
    };
    schema.index()?;
    Ok(schema)
}

/// Parses the official tables file contents.
pub fn parse_schemas(json: &str) -> Result<BTreeMap<String, DatabaseSchema>, SchemaError> {
    let raws: Vec<RawDb> =
        serde_json::from_str(json).map_err(|e| SchemaError::Format(e.to_string()))?;
    let mut out = BTreeMap::new();
    for raw in raws {
        let schema = schema_from_raw(raw)?;
        let id = schema.db_id.clone();
        if out.insert(id.clone(), schema).is_some() {
            return Err(SchemaError::DuplicateDb(id));
        }
    }
    Ok(out)
}

pub fn load_schemas(tables_file: &Path) -> Result<BTreeMap<String, DatabaseSchema>, SchemaError> {
    parse_schemas(&fs::read_to_string(tables_file)?)
}

/// Merges several tables files. The same `db_id` may appear in more than one
/// file (Spider, SParC and CoSQL ship overlapping copies); the first wins.
pub fn load_schema_files(files: &[PathBuf]) -> Result<BTreeMap<String, DatabaseSchema>, SchemaError> {
    let mut out = BTreeMap::new();
    for f in files {
        for (k, v) in load_schemas(f)? {
            out.entry(k).or_insert(v);
        }
    }
    Ok(out)
}

pub fn database_path(db_root: &Path, db_id: &str) -> PathBuf {
    db_root.join(db_id).join(format!("{db_id}.sqlite"))
}

/// Content index of `<db_root>/<db_id>/<db_id>.sqlite` with the default
/// categorical threshold.
pub fn open_content(db_root: &Path, db_id: &str) -> Result<ContentIndex, SchemaError> {
    ContentIndex::open(db_root, db_id, DEFAULT_CATEGORICAL_THRESHOLD)
}

/// A literal looked up in the content index.
#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Text(String),
    Number(f64),
}

impl CellValue {
    /// Number if the text parses as one.
    pub fn from_literal(text: &str, numeric: bool) -> CellValue {
        if numeric {
            if let Ok(v) = text.trim().parse::<f64>() {
                return CellValue::Number(v);
            }
        }
        CellValue::Text(text.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueStat {
    /// First spelling seen.
    pub display: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnContent {
    pub ty: ColumnType,
    /// Keyed by the lowercased text form of each distinct value.
    pub values: BTreeMap<String, ValueStat>,
    numbers: BTreeSet<u64>,
    pub categorical: bool,
}

impl ColumnContent {
    pub fn distinct_count(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableContent {
    /// Name as stored in the database.
    pub name: String,
    pub row_count: usize,
    /// Keyed by lowercased column name; insertion order kept separately.
    pub columns: BTreeMap<String, ColumnContent>,
    pub column_order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColumnKey {
    pub table: String,
    pub column: String,
}

/// Distinct-value inventory of every column in one database.
#[derive(Debug, Clone)]
pub struct ContentIndex {
    pub db_id: String,
    pub threshold: usize,
    /// Keyed by lowercased table name.
    pub tables: BTreeMap<String, TableContent>,
    /// Normalized token string of each text value → columns holding it.
    by_tokens: HashMap<String, Vec<(ColumnKey, String)>>,
}

fn num_key(v: f64) -> Option<u64> {
    if v.is_nan() {
        None
    } else if v == 0.0 {
        Some(0f64.to_bits())
    } else {
        Some(v.to_bits())
    }
}

/// Lowercased alphanumeric tokens joined by single spaces.
pub fn normalize_tokens(text: &str) -> String {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn format_real(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

/// In-memory table used to build an index without a database file.
#[derive(Debug, Clone)]
pub struct TableData {
    pub name: String,
    pub columns: Vec<(String, ColumnType)>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
}

struct IndexBuilder {
    threshold: usize,
    tables: BTreeMap<String, TableContent>,
}

impl IndexBuilder {
    fn add_table(&mut self, name: &str, columns: &[(String, ColumnType)]) -> String {
        let key = name.to_lowercase();
        let mut map = BTreeMap::new();
        for (c, ty) in columns {
            map.insert(
                c.to_lowercase(),
                ColumnContent {
                    ty: *ty,
                    values: BTreeMap::new(),
                    numbers: BTreeSet::new(),
                    categorical: false,
                },
            );
        }
        self.tables.insert(
            key.clone(),
            TableContent {
                name: name.to_string(),
                row_count: 0,
                columns: map,
                column_order: columns.iter().map(|(c, _)| c.to_lowercase()).collect(),
            },
        );
        key
    }

    fn add_cell(&mut self, table: &str, column: &str, cell: &Cell) {
        let Some(t) = self.tables.get_mut(table) else { return };
        let Some(col) = t.columns.get_mut(column) else { return };
        let (text, number) = match cell {
            Cell::Null => return,
            Cell::Integer(i) => (i.to_string(), Some(*i as f64)),
            Cell::Real(r) => (format_real(*r), Some(*r)),
            Cell::Text(s) => (s.clone(), s.trim().parse::<f64>().ok()),
        };
        if let Some(k) = number.and_then(num_key) {
            col.numbers.insert(k);
        }
        col.values
            .entry(text.to_lowercase())
            .and_modify(|s| s.count += 1)
            .or_insert(ValueStat { display: text, count: 1 });
    }

    fn finish(mut self, db_id: &str) -> ContentIndex {
        let mut by_tokens: HashMap<String, Vec<(ColumnKey, String)>> = HashMap::new();
        for (tkey, t) in self.tables.iter_mut() {
            for (ckey, col) in t.columns.iter_mut() {
                let n = col.values.len();
                col.categorical = col.ty == ColumnType::Text && n > 0 && n <= self.threshold;
                for stat in col.values.values() {
                    if stat.display.trim().parse::<f64>().is_ok() {
                        continue;
                    }
                    let norm = normalize_tokens(&stat.display);
                    if norm.is_empty() || norm.len() > 64 {
                        continue;
                    }
                    by_tokens.entry(norm).or_default().push((
                        ColumnKey { table: tkey.clone(), column: ckey.clone() },
                        stat.display.clone(),
                    ));
                }
            }
        }
        for v in by_tokens.values_mut() {
            v.sort();
            v.dedup();
        }
        ContentIndex { db_id: db_id.to_string(), threshold: self.threshold, tables: self.tables, by_tokens }
    }
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

impl ContentIndex {
    pub fn from_tables(db_id: &str, tables: &[TableData], threshold: usize) -> ContentIndex {
        let mut b = IndexBuilder { threshold, tables: BTreeMap::new() };
        for t in tables {
            let key = b.add_table(&t.name, &t.columns);
            for row in &t.rows {
                if let Some(tc) = b.tables.get_mut(&key) {
                    tc.row_count += 1;
                }
                for ((cname, _), cell) in t.columns.iter().zip(row) {
                    b.add_cell(&key, &cname.to_lowercase(), cell);
                }
            }
        }
        b.finish(db_id)
    }

    /// Reads every table of `<db_root>/<db_id>/<db_id>.sqlite`.
    pub fn open(db_root: &Path, db_id: &str, threshold: usize) -> Result<ContentIndex, SchemaError> {
        let path = database_path(db_root, db_id);
        if !path.is_file() {
            return Err(SchemaError::MissingDatabase { db_id: db_id.to_string(), path });
        }
        let qerr = |source| SchemaError::Query { db_id: db_id.to_string(), source };
        let conn = Connection::open_with_flags(&path, OpenFlags::SQLITE_OPEN_READ_ONLY).map_err(qerr)?;
        let mut names: Vec<String> = {
            let mut stmt = conn
                .prepare("SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%'")
                .map_err(qerr)?;
            let rows = stmt.query_map([], |r| r.get::<_, String>(0)).map_err(qerr)?;
            rows.collect::<Result<_, _>>().map_err(qerr)?
        };
        names.sort();

        let mut b = IndexBuilder { threshold, tables: BTreeMap::new() };
        for name in names {
            let columns: Vec<(String, ColumnType)> = {
                let mut stmt = conn
                    .prepare(&format!("PRAGMA table_info({})", quote_ident(&name)))
                    .map_err(qerr)?;
                let rows = stmt
                    .query_map([], |r| Ok((r.get::<_, String>(1)?, r.get::<_, String>(2)?)))
                    .map_err(qerr)?;
                let raw: Vec<(String, String)> = rows.collect::<Result<_, _>>().map_err(qerr)?;
                raw.into_iter().map(|(c, d)| (c, ColumnType::from_sqlite(&d))).collect()
            };
            let key = b.add_table(&name, &columns);
            let mut stmt = conn.prepare(&format!("SELECT * FROM {}", quote_ident(&name))).map_err(qerr)?;
            let ncols = stmt.column_count();
            let col_keys: Vec<String> = columns.iter().map(|(c, _)| c.to_lowercase()).collect();
            let mut rows = stmt.query([]).map_err(qerr)?;
            while let Some(row) = rows.next().map_err(qerr)? {
                if let Some(tc) = b.tables.get_mut(&key) {
                    tc.row_count += 1;
                }
                for (i, ckey) in col_keys.iter().enumerate().take(ncols) {
                    let cell = match row.get_ref(i).map_err(qerr)? {
                        ValueRef::Null | ValueRef::Blob(_) => Cell::Null,
                        ValueRef::Integer(v) => Cell::Integer(v),
                        ValueRef::Real(v) => Cell::Real(v),
                        ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
                    };
                    b.add_cell(&key, ckey, &cell);
                }
            }
        }
        Ok(b.finish(db_id))
    }

    pub fn column(&self, table: &str, column: &str) -> Result<&ColumnContent, SchemaError> {
        self.tables
            .get(&table.to_lowercase())
            .and_then(|t| t.columns.get(&column.to_lowercase()))
            .ok_or_else(|| SchemaError::UnknownColumn {
                table: table.to_string(),
                column: column.to_string(),
            })
    }

    /// Text matches case-insensitively and exactly; numbers match by value.
    pub fn contains_value(&self, table: &str, column: &str, value: &CellValue) -> Result<bool, SchemaError> {
        let col = self.column(table, column)?;
        Ok(match value {
            CellValue::Text(s) => col.values.contains_key(&s.to_lowercase()),
            CellValue::Number(v) => num_key(*v).is_some_and(|k| col.numbers.contains(&k)),
        })
    }

    /// Whether any column of `table` holds the value.
    pub fn table_contains(&self, table: &str, value: &CellValue) -> bool {
        let Some(t) = self.tables.get(&table.to_lowercase()) else { return false };
        t.columns.keys().any(|c| self.contains_value(table, c, value).unwrap_or(false))
    }

    pub fn categorical_columns(&self) -> BTreeSet<ColumnKey> {
        let mut out = BTreeSet::new();
        for (t, tc) in &self.tables {
            for (c, col) in &tc.columns {
                if col.categorical {
                    out.insert(ColumnKey { table: t.clone(), column: c.clone() });
                }
            }
        }
        out
    }

    pub fn is_categorical(&self, table: &str, column: &str) -> bool {
        self.column(table, column).map(|c| c.categorical).unwrap_or(false)
    }

    /// Columns holding a text value whose normalized tokens equal `norm`.
    pub fn lookup_tokens(&self, norm: &str) -> &[(ColumnKey, String)] {
        self.by_tokens.get(norm).map_or(&[], Vec::as_slice)
    }

    /// Distinct text values of a column (original spelling), in key order.
    pub fn text_values<'a>(&'a self, table: &str, column: &str) -> impl Iterator<Item = &'a str> + 'a {
        self.tables
            .get(&table.to_lowercase())
            .and_then(|t| t.columns.get(&column.to_lowercase()))
            .into_iter()
            .flat_map(|c| c.values.values().map(|s| s.display.as_str()))
    }
}
