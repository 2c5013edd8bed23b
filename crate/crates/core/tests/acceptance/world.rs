//! Shared fixture: one database with content, base queries with hand-derived
//! difficulty labels, and label-preserving or label-breaking edits.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use text2sql_core::eval::Hardness;
use text2sql_core::schema::{database_path, ColumnType as T, ContentIndex, DatabaseSchema, DEFAULT_CATEGORICAL_THRESHOLD};

pub const DB_ID: &str = "concert_singer";

const DDL: &str = "
CREATE TABLE stadium (Stadium_ID INTEGER PRIMARY KEY, Location TEXT, Name TEXT, Capacity INTEGER);
CREATE TABLE singer (Singer_ID INTEGER PRIMARY KEY, Name TEXT, Country TEXT, Age INTEGER);
CREATE TABLE concert (concert_ID INTEGER PRIMARY KEY, concert_Name TEXT, Stadium_ID INTEGER, Year INTEGER);
CREATE TABLE singer_in_concert (concert_ID INTEGER, Singer_ID INTEGER);
INSERT INTO stadium VALUES (1, 'Raith Rovers', 'Stark''s Park', 10104), (2, 'Ayr United', 'Somerset Park', 11998),
  (3, 'East Fife', 'Bayview Stadium', 2000), (4, 'Queen''s Park', 'Hampden Park', 52500),
  (5, 'Stirling Albion', 'Forthbank Stadium', 3808), (6, 'Arbroath', 'Gayfield Park', 4125);
INSERT INTO singer VALUES (1, 'Joe Sharp', 'Netherlands', 52), (2, 'Timbaland', 'United States', 32),
  (3, 'Justin Brown', 'France', 29), (4, 'Rose White', 'France', 41), (5, 'John Nizinik', 'France', 43),
  (6, 'Tribal King', 'France', 25);
INSERT INTO concert VALUES (1, 'Auditions', 1, 2014), (2, 'Super bootcamp', 2, 2014), (3, 'Home Visits', 2, 2015),
  (4, 'Week 1', 4, 2014), (5, 'Week 1', 6, 2015), (6, 'Week 2', 5, 2015);
INSERT INTO singer_in_concert VALUES (1, 2), (1, 3), (1, 5), (2, 3), (2, 6), (3, 5), (4, 4), (5, 6), (5, 3), (6, 2);
";

pub struct World {
    _dir: tempfile::TempDir,
    pub db_root: PathBuf,
    pub schema: DatabaseSchema,
    pub schemas: BTreeMap<String, DatabaseSchema>,
    pub index: ContentIndex,
}

impl World {
    pub fn new() -> World {
        let dir = tempfile::tempdir().unwrap();
        let db_root = dir.path().join("database");
        let path = database_path(&db_root, DB_ID);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        rusqlite::Connection::open(&path).unwrap().execute_batch(DDL).unwrap();
        let schema = schema();
        let schemas = BTreeMap::from([(DB_ID.to_string(), schema.clone())]);
        let index = ContentIndex::open(&db_root, DB_ID, DEFAULT_CATEGORICAL_THRESHOLD).unwrap();
        World { _dir: dir, db_root, schema, schemas, index }
    }

    pub fn db_path(&self) -> PathBuf {
        database_path(&self.db_root, DB_ID)
    }

    pub fn root(&self) -> &Path {
        &self.db_root
    }
}

pub fn schema() -> DatabaseSchema {
    DatabaseSchema::from_parts(
        DB_ID,
        &[
            ("stadium", &[("Stadium_ID", T::Number), ("Location", T::Text), ("Name", T::Text), ("Capacity", T::Number)]),
            ("singer", &[("Singer_ID", T::Number), ("Name", T::Text), ("Country", T::Text), ("Age", T::Number)]),
            ("concert", &[("concert_ID", T::Number), ("concert_Name", T::Text), ("Stadium_ID", T::Number), ("Year", T::Number)]),
            ("singer_in_concert", &[("concert_ID", T::Number), ("Singer_ID", T::Number)]),
        ],
        &[
            (("concert", "Stadium_ID"), ("stadium", "Stadium_ID")),
            (("singer_in_concert", "Singer_ID"), ("singer", "Singer_ID")),
            (("singer_in_concert", "concert_ID"), ("concert", "concert_ID")),
        ],
    )
    .unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lit {
    Num,
    Str,
    /// A nested query; never edited.
    Raw,
}

#[derive(Debug, Clone, Copy)]
pub struct Cond {
    pub lhs: &'static str,
    pub op: &'static str,
    pub rhs: &'static str,
    pub lit: Lit,
}

const fn c(lhs: &'static str, op: &'static str, rhs: &'static str, lit: Lit) -> Cond {
    Cond { lhs, op, rhs, lit }
}

#[derive(Debug, Clone, Copy)]
pub struct Base {
    pub select: &'static [&'static str],
    pub from: &'static str,
    pub conds: &'static [Cond],
    pub conj: &'static str,
    pub tail: &'static str,
    pub hardness: Hardness,
}

use Hardness::{Easy, Extra, Hard, Medium};
use Lit::{Num, Raw, Str};

const JOIN_SC: &str = "singer_in_concert AS T1 JOIN concert AS T2 ON T1.concert_ID = T2.concert_ID";
const JOIN_ST: &str = "stadium AS T1 JOIN concert AS T2 ON T1.Stadium_ID = T2.Stadium_ID";
const JOIN_3: &str = "singer AS T1 JOIN singer_in_concert AS T2 ON T1.Singer_ID = T2.Singer_ID \
                      JOIN concert AS T3 ON T2.concert_ID = T3.concert_ID";

/// Labels follow the reference rules: clause components (WHERE, GROUP BY,
/// ORDER BY, LIMIT, each extra table, each OR, each LIKE), nested
/// components (subqueries in conditions, set operations) and the "others"
/// count (several aggregates, several select items, several conditions,
/// several grouping columns).
pub const BASES: &[Base] = &[
    Base { select: &["count(*)"], from: "singer", conds: &[], conj: "AND", tail: "", hardness: Easy },
    Base { select: &["Name", "Country", "Age"], from: "singer", conds: &[], conj: "AND", tail: "ORDER BY Age DESC", hardness: Medium },
    Base {
        select: &["avg(Age)", "min(Age)", "max(Age)"],
        from: "singer",
        conds: &[c("Country", "=", "'France'", Str)],
        conj: "AND",
        tail: "",
        hardness: Medium,
    },
    Base {
        select: &["Name"],
        from: "singer",
        conds: &[c("Age", ">", "40", Num), c("Country", "=", "'France'", Str)],
        conj: "AND",
        tail: "",
        hardness: Medium,
    },
    Base {
        select: &["Name", "Age"],
        from: "singer",
        conds: &[c("Age", ">", "30", Num), c("Age", "<", "50", Num), c("Country", "!=", "'France'", Str)],
        conj: "AND",
        tail: "",
        hardness: Medium,
    },
    Base {
        select: &["Name"],
        from: "singer",
        conds: &[c("Age", "<", "30", Num), c("Country", "=", "'Netherlands'", Str)],
        conj: "OR",
        tail: "",
        hardness: Medium,
    },
    Base { select: &["T2.concert_Name"], from: JOIN_SC, conds: &[c("T2.Year", ">", "2013", Num)], conj: "AND", tail: "", hardness: Medium },
    Base {
        select: &["T1.Name", "T2.Year"],
        from: JOIN_ST,
        conds: &[c("T1.Capacity", ">", "5000", Num), c("T2.Year", "=", "2014", Num)],
        conj: "AND",
        tail: "",
        hardness: Extra,
    },
    Base { select: &["Country", "count(*)"], from: "singer", conds: &[], conj: "AND", tail: "GROUP BY Country", hardness: Medium },
    Base {
        select: &["Country"],
        from: "singer",
        conds: &[c("Age", ">", "20", Num)],
        conj: "AND",
        tail: "GROUP BY Country HAVING count(*) > 1",
        hardness: Medium,
    },
    Base {
        select: &["Name"],
        from: "stadium",
        conds: &[c("Capacity", ">", "(SELECT avg(Capacity) FROM stadium)", Raw)],
        conj: "AND",
        tail: "",
        hardness: Hard,
    },
    Base {
        select: &["Name"],
        from: "singer",
        conds: &[c("Singer_ID", "NOT IN", "(SELECT Singer_ID FROM singer_in_concert)", Raw)],
        conj: "AND",
        tail: "",
        hardness: Hard,
    },
    Base {
        select: &["Name"],
        from: "stadium",
        conds: &[c("Capacity", ">", "5000", Num)],
        conj: "AND",
        tail: "INTERSECT SELECT Name FROM stadium WHERE Capacity < 20000",
        hardness: Hard,
    },
    Base {
        select: &["Country"],
        from: "singer",
        conds: &[c("Age", ">", "40", Num)],
        conj: "AND",
        tail: "EXCEPT SELECT Country FROM singer WHERE Age < 30",
        hardness: Hard,
    },
    Base { select: &["Name"], from: "singer", conds: &[], conj: "AND", tail: "ORDER BY Age LIMIT 1", hardness: Medium },
    Base { select: &["Name", "Capacity"], from: "stadium", conds: &[], conj: "AND", tail: "ORDER BY Capacity DESC LIMIT 3", hardness: Medium },
    Base { select: &["T1.Name", "count(*)"], from: JOIN_ST, conds: &[], conj: "AND", tail: "GROUP BY T1.Stadium_ID", hardness: Medium },
    Base { select: &["T1.Name"], from: JOIN_3, conds: &[c("T3.Year", "=", "2014", Num)], conj: "AND", tail: "", hardness: Hard },
    Base { select: &["Name"], from: "singer", conds: &[c("Name", "LIKE", "'%Sharp%'", Str)], conj: "AND", tail: "", hardness: Medium },
    Base {
        select: &["count(*)"],
        from: "concert",
        conds: &[c("Year", "=", "2014", Num), c("Year", "=", "2015", Num)],
        conj: "OR",
        tail: "",
        hardness: Medium,
    },
    Base {
        select: &["Name", "Location"],
        from: "stadium",
        conds: &[c("Capacity", ">", "4000", Num), c("Capacity", "<", "20000", Num)],
        conj: "AND",
        tail: "ORDER BY Capacity DESC",
        hardness: Extra,
    },
    Base { select: &["max(Capacity)", "avg(Capacity)"], from: "stadium", conds: &[], conj: "AND", tail: "", hardness: Medium },
    Base {
        select: &["Country", "avg(Age)"],
        from: "singer",
        conds: &[c("Age", ">", "25", Num)],
        conj: "AND",
        tail: "GROUP BY Country ORDER BY avg(Age) DESC LIMIT 2",
        hardness: Extra,
    },
    Base { select: &["DISTINCT Country"], from: "singer", conds: &[c("Age", ">=", "30", Num)], conj: "AND", tail: "", hardness: Easy },
    Base { select: &["Name"], from: "singer", conds: &[c("Age", "<=", "35", Num)], conj: "AND", tail: "", hardness: Easy },
    Base {
        select: &["T1.Name"],
        from: JOIN_ST,
        conds: &[c("T2.Year", "=", "2014", Num)],
        conj: "AND",
        tail: "INTERSECT SELECT T1.Name FROM stadium AS T1 JOIN concert AS T2 ON T1.Stadium_ID = T2.Stadium_ID WHERE T2.Year = 2015",
        hardness: Extra,
    },
];

const NUMBERS: &[&str] = &["17", "25", "30", "41", "2013", "2015", "4000", "9999"];
const STRINGS: &[&str] = &["'France'", "'Netherlands'", "'Spain'", "'Hampden Park'", "'United States'", "'%a%'"];

/// A base query with editable parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub select: Vec<String>,
    pub from: String,
    pub conds: Vec<(String, String, String, Lit)>,
    pub conj: String,
    pub tail: String,
}

impl Query {
    pub fn of(b: &Base) -> Query {
        Query {
            select: b.select.iter().map(|s| s.to_string()).collect(),
            from: b.from.to_string(),
            conds: b.conds.iter().map(|c| (c.lhs.to_string(), c.op.to_string(), c.rhs.to_string(), c.lit)).collect(),
            conj: b.conj.to_string(),
            tail: b.tail.to_string(),
        }
    }

    pub fn sql(&self) -> String {
        let mut s = format!("SELECT {} FROM {}", self.select.join(", "), self.from);
        if !self.conds.is_empty() {
            let conds: Vec<String> = self.conds.iter().map(|(l, o, r, _)| format!("{l} {o} {r}")).collect();
            s.push_str(" WHERE ");
            s.push_str(&conds.join(&format!(" {} ", self.conj)));
        }
        if !self.tail.is_empty() {
            s.push(' ');
            s.push_str(&self.tail);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edit {
    ReorderSelect,
    SwapConditions,
    ChangeLiteral,
    FlipOperator,
}

impl Edit {
    pub const ALL: [Edit; 4] = [Edit::ReorderSelect, Edit::SwapConditions, Edit::ChangeLiteral, Edit::FlipOperator];

    /// Whether the edited query still matches the original exactly.
    pub fn preserves_match(self) -> bool {
        self != Edit::FlipOperator
    }

    pub fn name(self) -> &'static str {
        match self {
            Edit::ReorderSelect => "reorder-select",
            Edit::SwapConditions => "swap-conditions",
            Edit::ChangeLiteral => "change-literal",
            Edit::FlipOperator => "flip-operator",
        }
    }
}

fn flipped(op: &str) -> Option<&'static str> {
    Some(match op {
        ">" => "<",
        "<" => ">",
        ">=" => "<=",
        "<=" => ">=",
        "=" => "!=",
        "!=" => "=",
        _ => return None,
    })
}

fn different_order<T: Clone + PartialEq>(items: &[T], rng: &mut impl Rng) -> Vec<T> {
    loop {
        let mut v = items.to_vec();
        v.shuffle(rng);
        if v != items {
            return v;
        }
    }
}

/// Applies `edit`, or returns `None` when the query has nothing to edit.
pub fn apply(q: &Query, edit: Edit, rng: &mut impl Rng) -> Option<Query> {
    let mut out = q.clone();
    match edit {
        Edit::ReorderSelect => {
            if q.select.len() < 2 {
                return None;
            }
            out.select = different_order(&q.select, rng);
        }
        Edit::SwapConditions => {
            if q.conds.len() < 2 {
                return None;
            }
            out.conds = different_order(&q.conds, rng);
        }
        Edit::ChangeLiteral => {
            let slots: Vec<usize> = (0..q.conds.len()).filter(|&i| q.conds[i].3 != Lit::Raw).collect();
            let &i = slots.choose(rng)?;
            let pool = if q.conds[i].3 == Lit::Num { NUMBERS } else { STRINGS };
            let current = q.conds[i].2.clone();
            let fresh: Vec<&&str> = pool.iter().filter(|v| **v != current).collect();
            out.conds[i].2 = fresh.choose(rng)?.to_string();
        }
        Edit::FlipOperator => {
            let slots: Vec<usize> = (0..q.conds.len()).filter(|&i| flipped(&q.conds[i].1).is_some()).collect();
            let &i = slots.choose(rng)?;
            out.conds[i].1 = flipped(&q.conds[i].1)?.to_string();
        }
    }
    Some(out)
}
