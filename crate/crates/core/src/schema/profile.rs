use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{DatabaseSchema, SchemaError};

/// Per-table complexity: `NA + 2·RD + DRT`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableProfile {
    pub table: String,
    /// Attribute count.
    pub na: usize,
    /// Outgoing foreign-key constraints; the only degree that feeds complexity.
    pub rd: usize,
    /// Incoming foreign-key constraints, reported alongside for reference.
    pub rd_incoming: usize,
    /// Length of the longest acyclic outgoing foreign-key chain.
    pub drt: usize,
    pub complexity: usize,
    pub query_count: usize,
}

/// Longest outgoing foreign-key path from `table`. A path stops when it
/// would revisit a table, so cyclic schemas stay finite.
pub fn drt(db: &DatabaseSchema, table: &str) -> usize {
    let adj: BTreeMap<&str, BTreeSet<&str>> = db
        .tables
        .iter()
        .map(|t| (t.name.as_str(), t.foreign_keys.iter().map(|f| f.ref_table.as_str()).collect()))
        .collect();
    let mut visited = BTreeSet::from([table]);
    longest(&adj, table, &mut visited)
}

fn longest<'a>(adj: &BTreeMap<&'a str, BTreeSet<&'a str>>, at: &'a str, visited: &mut BTreeSet<&'a str>) -> usize {
    let mut best = 0;
    if let Some(next) = adj.get(at) {
        for &n in next {
            if visited.insert(n) {
                best = best.max(1 + longest(adj, n, visited));
                visited.remove(n);
            }
        }
    }
    best
}

pub fn profile_table(
    db: &DatabaseSchema,
    pool_stats: &BTreeMap<String, usize>,
    table: &str,
) -> Result<TableProfile, SchemaError> {
    let t = db.table(table).ok_or_else(|| SchemaError::TableNotFound(table.to_string()))?;
    let na = t.columns.len();
    let rd = t.foreign_keys.len();
    let rd_incoming = db
        .tables
        .iter()
        .flat_map(|o| &o.foreign_keys)
        .filter(|f| f.ref_table == t.name)
        .count();
    let drt = drt(db, &t.name);
    Ok(TableProfile {
        table: t.name.clone(),
        na,
        rd,
        rd_incoming,
        drt,
        complexity: na + 2 * rd + drt,
        query_count: pool_stats.get(&t.name).copied().unwrap_or(0),
    })
}

/// Profiles every table in schema order.
pub fn profile_all(db: &DatabaseSchema, pool_stats: &BTreeMap<String, usize>) -> Vec<TableProfile> {
    db.tables
        .iter()
        .map(|t| profile_table(db, pool_stats, &t.name).expect("table comes from the schema"))
        .collect()
}

/// CSV with columns `table,NA,RD,DRT,complexity,query_count,RD_in`.
pub fn write_profiles_csv<W: Write>(profiles: &[TableProfile], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["table", "NA", "RD", "DRT", "complexity", "query_count", "RD_in"])?;
    for p in profiles {
        w.write_record([
            p.table.clone(),
            p.na.to_string(),
            p.rd.to_string(),
            p.drt.to_string(),
            p.complexity.to_string(),
            p.query_count.to_string(),
            p.rd_incoming.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
