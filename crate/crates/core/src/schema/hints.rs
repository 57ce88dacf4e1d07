use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rusqlite::types::ValueRef;
use rusqlite::Connection;
use serde::{Deserialize, Serialize};

use super::{quote_ident, DatabaseSchema, SchemaError, TableSchema, TypeClass};
use crate::util::fnv1a64;

/// Upper bound on representative or sampled values per column.
pub const MAX_HINT_VALUES: usize = 5;
const TEXT_SAMPLE_POOL: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HintValue {
    Int(i64),
    Real(f64),
    Text(String),
}

impl HintValue {
    fn from_ref(v: ValueRef<'_>) -> Option<Self> {
        match v {
            ValueRef::Integer(i) => Some(HintValue::Int(i)),
            ValueRef::Real(r) => Some(HintValue::Real(r)),
            ValueRef::Text(t) => Some(HintValue::Text(String::from_utf8_lossy(t).into_owned())),
            ValueRef::Null | ValueRef::Blob(_) => None,
        }
    }

    fn as_f64(&self) -> Option<f64> {
        match self {
            HintValue::Int(i) => Some(*i as f64),
            HintValue::Real(r) => Some(*r),
            HintValue::Text(_) => None,
        }
    }

    /// SQLite's cross-type ordering: numbers sort before text.
    pub fn sqlite_cmp(&self, other: &Self) -> Ordering {
        match (self.as_f64(), other.as_f64(), self, other) {
            (Some(a), Some(b), _, _) => a.total_cmp(&b),
            (Some(_), None, _, _) => Ordering::Less,
            (None, Some(_), _, _) => Ordering::Greater,
            (_, _, HintValue::Text(a), HintValue::Text(b)) => a.cmp(b),
            _ => Ordering::Equal,
        }
    }
}

impl fmt::Display for HintValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HintValue::Int(i) => write!(f, "{i}"),
            HintValue::Real(r) => write!(f, "{r}"),
            HintValue::Text(s) => write!(f, "'{}'", s.replace('\'', "''")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnHint {
    pub column: String,
    pub class: TypeClass,
    /// Representative (enum-like) or sampled (text) values.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<HintValue>,
    /// Observed `(min, max)` for numeric and date columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(HintValue, HintValue)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentHints {
    pub table: String,
    /// The table held no rows; every hint is absent.
    pub empty: bool,
    pub columns: Vec<ColumnHint>,
}

impl ContentHints {
    pub fn column(&self, name: &str) -> Option<&ColumnHint> {
        self.columns.iter().find(|c| c.column == name)
    }
}

/// Collects value hints for one table. Text sampling is seeded per
/// `(seed, table, column)` so reruns with the same seed agree.
pub fn collect_content_hints(conn: &Connection, table: &TableSchema, seed: u64) -> Result<ContentHints, SchemaError> {
    let access = |e: rusqlite::Error| SchemaError::Access { table: table.name.clone(), message: e.to_string() };
    let qt = quote_ident(&table.name);
    let empty: bool = conn
        .query_row(&format!("SELECT NOT EXISTS (SELECT 1 FROM {qt})"), [], |r| r.get(0))
        .map_err(access)?;
    let mut columns = Vec::with_capacity(table.columns.len());
    for col in &table.columns {
        let mut hint = ColumnHint { column: col.name.clone(), class: col.class, values: Vec::new(), range: None };
        if empty {
            columns.push(hint);
            continue;
        }
        let qc = quote_ident(&col.name);
        match col.class {
            TypeClass::EnumLike => {
                let sql = format!(
                    "SELECT {qc} FROM {qt} WHERE {qc} IS NOT NULL GROUP BY {qc} ORDER BY COUNT(*) DESC, {qc} LIMIT {MAX_HINT_VALUES}"
                );
                hint.values = column_values(conn, &sql).map_err(access)?;
            }
            TypeClass::Numeric | TypeClass::Date => {
                let sql = format!("SELECT MIN({qc}), MAX({qc}) FROM {qt}");
                hint.range = conn
                    .query_row(&sql, [], |r| {
                        Ok((HintValue::from_ref(r.get_ref(0)?), HintValue::from_ref(r.get_ref(1)?)))
                    })
                    .map_err(access)
                    .map(|(lo, hi)| lo.zip(hi))?;
            }
            TypeClass::Text => {
                let sql = format!(
                    "SELECT DISTINCT {qc} FROM {qt} WHERE {qc} IS NOT NULL ORDER BY {qc} LIMIT {TEXT_SAMPLE_POOL}"
                );
                let pool = column_values(conn, &sql).map_err(access)?;
                hint.values = if pool.len() <= MAX_HINT_VALUES {
                    pool
                } else {
                    let key = format!("{}.{}", table.name, col.name);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(key.as_bytes()));
                    let mut picked = rand::seq::index::sample(&mut rng, pool.len(), MAX_HINT_VALUES).into_vec();
                    picked.sort_unstable();
                    picked.into_iter().map(|i| pool[i].clone()).collect()
                };
            }
            TypeClass::Other => {}
        }
        columns.push(hint);
    }
    Ok(ContentHints { table: table.name.clone(), empty, columns })
}

fn column_values(conn: &Connection, sql: &str) -> rusqlite::Result<Vec<HintValue>> {
    let mut stmt = conn.prepare(sql)?;
    let mut rows = stmt.query([])?;
    let mut out = Vec::new();
    while let Some(row) = rows.next()? {
        if let Some(v) = HintValue::from_ref(row.get_ref(0)?) {
            out.push(v);
        }
    }
    Ok(out)
}

/// Hints for several tables, keyed by table name.
pub fn collect_hints_for(
    conn: &Connection,
    db: &DatabaseSchema,
    tables: &[String],
    seed: u64,
) -> Result<BTreeMap<String, ContentHints>, SchemaError> {
    let mut out = BTreeMap::new();
    for name in tables {
        let t = db.table(name).ok_or_else(|| SchemaError::TableNotFound(name.clone()))?;
        out.insert(name.clone(), collect_content_hints(conn, t, seed)?);
    }
    Ok(out)
}
