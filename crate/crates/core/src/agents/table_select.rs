use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::llm::{prompts, CompletionRequest, Gateway, ModelRole};
use crate::schema::{profile_all, DatabaseSchema, TableProfile};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSelection {
    /// Chosen tables: valid model picks first, then deterministic fill.
    pub tables: Vec<String>,
    /// Names the model gave that are not in the catalog.
    pub dropped: Vec<String>,
    /// How many of `tables` came from the fallback ranking.
    pub filled: usize,
}

/// Tables ordered by complexity per existing query, `c / (1 + count)`,
/// highest first; ties go to the lower name. On an empty pool this is a
/// plain complexity ranking.
pub fn fallback_ranking(profiles: &[TableProfile]) -> Vec<String> {
    let mut ranked: Vec<&TableProfile> = profiles.iter().collect();
    // Compare c1·(1+n2) with c2·(1+n1) to stay in integers.
    ranked.sort_by(|a, b| {
        let lhs = a.complexity * (1 + b.query_count);
        let rhs = b.complexity * (1 + a.query_count);
        rhs.cmp(&lhs).then_with(|| a.table.cmp(&b.table))
    });
    ranked.into_iter().map(|p| p.table.clone()).collect()
}

fn selection_prompt(db: &DatabaseSchema, profiles: &[TableProfile], n: usize) -> String {
    let mut listing = String::new();
    for (t, p) in db.tables.iter().zip(profiles) {
        let cols: Vec<&str> = t.columns.iter().map(|c| c.name.as_str()).collect();
        write!(
            listing,
            "- {}: NA={}, RD={}, DRT={}, queries={}; columns: {}",
            t.name,
            p.na,
            p.rd,
            p.drt,
            p.query_count,
            cols.join(", ")
        )
        .unwrap();
        if !t.foreign_keys.is_empty() {
            let refs: Vec<String> = t
                .foreign_keys
                .iter()
                .map(|f| format!("{} -> {}.{}", f.columns.join("+"), f.ref_table, f.ref_columns.join("+")))
                .collect();
            write!(listing, "; references: {}", refs.join(", ")).unwrap();
        }
        listing.push('\n');
    }
    prompts::render(prompts::TABLE_SELECTION, &[("tables", listing.trim_end()), ("n", &n.to_string())])
}

/// Table names from a selection answer: the last `TABLES:` line if there is
/// one, otherwise every identifier-like word. Order kept, repeats removed.
pub fn parse_table_answer(answer: &str) -> Vec<String> {
    let line = answer
        .lines()
        .rev()
        .find_map(|l| {
            let upper = l.to_ascii_uppercase();
            upper.find("TABLES:").map(|i| &l[i + "TABLES:".len()..])
        })
        .unwrap_or(answer);
    let mut out: Vec<String> = Vec::new();
    for word in line.split(|c: char| !(c.is_alphanumeric() || c == '_')) {
        let w = word.to_lowercase();
        if !w.is_empty() && !out.contains(&w) {
            out.push(w);
        }
    }
    out
}

/// Picks `n` tables. With a gateway the reasoner proposes names which are
/// validated against the catalog; missing picks are filled from
/// `fallback_ranking`. Without a gateway only the fallback is used.
pub fn table_select(
    gateway: Option<&Gateway>,
    db: &DatabaseSchema,
    pool_stats: &BTreeMap<String, usize>,
    n: usize,
) -> Result<TableSelection, AgentError> {
    if db.tables.is_empty() {
        return Err(AgentError::Selection("catalog has no tables".into()));
    }
    if n == 0 {
        return Err(AgentError::Selection("asked for zero tables".into()));
    }
    let n = n.min(db.tables.len());
    let profiles = profile_all(db, pool_stats);
    let mut tables = Vec::new();
    let mut dropped = Vec::new();
    if let Some(gw) = gateway {
        let answer = gw.complete(&CompletionRequest::for_role(ModelRole::Reasoner, selection_prompt(db, &profiles, n)))?;
        let explicit = answer.to_ascii_uppercase().contains("TABLES:");
        for name in parse_table_answer(&answer) {
            if db.table(&name).is_some() {
                if tables.len() < n {
                    tables.push(name);
                }
            } else if explicit {
                dropped.push(name);
            }
        }
    }
    let picked = tables.len();
    for name in fallback_ranking(&profiles) {
        if tables.len() == n {
            break;
        }
        if !tables.contains(&name) {
            tables.push(name);
        }
    }
    if tables.is_empty() {
        return Err(AgentError::Selection("no valid table names and no fallback".into()));
    }
    Ok(TableSelection { filled: tables.len() - picked, tables, dropped })
}
