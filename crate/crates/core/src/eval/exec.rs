//! Execution match against the example's SQLite database.

use std::path::Path;
use std::time::{Duration, Instant};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use thiserror::Error;

use crate::sql::{parse_unbound, SqlAst};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Relative tolerance for comparing floating-point cells.
pub const FLOAT_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("gold query failed on {db}: {message}")]
    GoldExecution { db: String, message: String },
    #[error("cannot open {db}: {message}")]
    Open { db: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct ExecMatch {
    pub matched: bool,
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

enum RunError {
    Timeout,
    Sql(String),
}

fn open(db_path: &Path) -> Result<Connection, ExecError> {
    let err = |e: rusqlite::Error| ExecError::Open { db: db_path.display().to_string(), message: e.to_string() };
    if !db_path.is_file() {
        return Err(ExecError::Open { db: db_path.display().to_string(), message: "no such file".into() });
    }
    Connection::open_with_flags(db_path, OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX)
        .map_err(err)
}

fn run(conn: &Connection, sql: &str, timeout: Duration) -> Result<Vec<Vec<Cell>>, RunError> {
    let start = Instant::now();
    conn.progress_handler(1000, Some(move || start.elapsed() > timeout));
    let res = (|| {
        let mut stmt = conn.prepare(sql)?;
        let n = stmt.column_count();
        let mut rows = stmt.query([])?;
        let mut out = Vec::new();
        while let Some(row) = rows.next()? {
            let mut r = Vec::with_capacity(n);
            for i in 0..n {
                r.push(match row.get_ref(i)? {
                    ValueRef::Null => Cell::Null,
                    ValueRef::Integer(v) => Cell::Int(v),
                    ValueRef::Real(v) => Cell::Real(v),
                    ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
                    ValueRef::Blob(b) => Cell::Blob(b.to_vec()),
                });
            }
            out.push(r);
        }
        Ok::<_, rusqlite::Error>(out)
    })();
    conn.progress_handler(0, None::<fn() -> bool>);
    res.map_err(|e| match e {
        rusqlite::Error::SqliteFailure(f, _) if f.code == rusqlite::ErrorCode::OperationInterrupted => {
            RunError::Timeout
        }
        other => RunError::Sql(other.to_string()),
    })
}

fn as_f64(c: &Cell) -> Option<f64> {
    match c {
        Cell::Int(v) => Some(*v as f64),
        Cell::Real(v) => Some(*v),
        _ => None,
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= FLOAT_REL_TOL * a.abs().max(b.abs())
}

pub fn cells_equal(a: &Cell, b: &Cell) -> bool {
    match (a, b) {
        (Cell::Int(x), Cell::Int(y)) => x == y,
        _ => match (as_f64(a), as_f64(b)) {
            (Some(x), Some(y)) => close(x, y),
            _ => a == b,
        },
    }
}

fn rows_equal(a: &[Cell], b: &[Cell]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| cells_equal(x, y))
}

fn sort_key(row: &[Cell]) -> Vec<(u8, f64, &[u8])> {
    row.iter()
        .map(|c| match c {
            Cell::Null => (0, 0.0, &[][..]),
            Cell::Int(v) => (1, *v as f64, &[][..]),
            Cell::Real(v) => (1, *v, &[][..]),
            Cell::Text(s) => (2, 0.0, s.as_bytes()),
            Cell::Blob(b) => (3, 0.0, b.as_slice()),
        })
        .collect()
}

fn sorted(rows: &[Vec<Cell>]) -> Vec<&Vec<Cell>> {
    let mut v: Vec<&Vec<Cell>> = rows.iter().collect();
    v.sort_by(|a, b| {
        sort_key(a).partial_cmp(&sort_key(b)).unwrap_or(std::cmp::Ordering::Equal)
    });
    v
}

/// Compares two result sets as multisets of rows, or as sequences when
/// `ordered`.
pub fn results_match(pred: &[Vec<Cell>], gold: &[Vec<Cell>], ordered: bool) -> bool {
    if pred.len() != gold.len() {
        return false;
    }
    if ordered {
        return pred.iter().zip(gold).all(|(a, b)| rows_equal(a, b));
    }
    let (ps, gs) = (sorted(pred), sorted(gold));
    if ps.iter().zip(&gs).all(|(a, b)| rows_equal(a, b)) {
        return true;
    }
    // Tolerant equality can disagree with the sort order; fall back to
    // matching rows one by one.
    let mut left: Vec<&Vec<Cell>> = gs;
    for p in ps {
        match left.iter().position(|g| rows_equal(p, g)) {
            Some(i) => {
                left.swap_remove(i);
            }
            None => return false,
        }
    }
    true
}

/// Whether the result order of `q` is fixed by an ORDER BY on the final
/// statement.
pub fn top_level_ordered(q: &SqlAst) -> bool {
    let mut cur = q;
    loop {
        if cur.order_by.is_some() {
            return true;
        }
        match &cur.set_op {
            Some((_, rhs)) => cur = rhs,
            None => return false,
        }
    }
}

/// Runs both queries on `db_path`. A failing or slow prediction is a
/// mismatch; a failing gold query is an error.
pub fn execution_match(pred: &str, gold: &str, db_path: &Path, timeout: Duration) -> Result<ExecMatch, ExecError> {
    let conn = open(db_path)?;
    let gold_rows = run(&conn, gold, timeout).map_err(|e| ExecError::GoldExecution {
        db: db_path.display().to_string(),
        message: match e {
            RunError::Timeout => format!("timed out after {timeout:?}"),
            RunError::Sql(m) => m,
        },
    })?;
    let ordered = parse_unbound(gold).map(|a| top_level_ordered(&a)).unwrap_or(false);
    match run(&conn, pred, timeout) {
        Ok(rows) => Ok(ExecMatch { matched: results_match(&rows, &gold_rows, ordered), timed_out: false }),
        Err(RunError::Timeout) => Ok(ExecMatch { matched: false, timed_out: true }),
        Err(RunError::Sql(_)) => Ok(ExecMatch { matched: false, timed_out: false }),
    }
}
