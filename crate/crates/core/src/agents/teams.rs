//! Generation, seed selection and expansion.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::analysis::{analyze, AnalyzedQuery};
use crate::llm::{extract_sql, prompts, CompletionRequest, Gateway, ModelRole};
use crate::pool::{SqlPool, SqlQueryRecord};
use crate::schema::{render_schema_block, ContentHints, DatabaseSchema};

/// Parsed candidates from one team call plus what was filtered out.
#[derive(Clone, Debug, Default)]
pub struct CandidateBatch {
    pub candidates: Vec<AnalyzedQuery>,
    pub stats: BatchStats,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchStats {
    pub requests: u32,
    pub extracted: usize,
    pub unparseable: usize,
    /// Referencing no base table, or a table outside the catalog.
    pub off_schema: usize,
    /// Normalized text equal to one of the seeds.
    pub seed_copies: usize,
    /// Valid candidates beyond the requested batch size.
    pub surplus: usize,
}

/// Completes `prompt`, retrying once when nothing can be extracted.
fn ask(gw: &Gateway, role: ModelRole, prompt: String, stats: &mut BatchStats, what: &'static str) -> Result<Vec<String>, AgentError> {
    let req = CompletionRequest::for_role(role, prompt);
    for _ in 0..2 {
        stats.requests += 1;
        let found = extract_sql(&gw.complete(&req)?);
        if !found.is_empty() {
            stats.extracted = found.len();
            return Ok(found);
        }
        tracing::warn!("{what} response held no SQL");
    }
    Err(AgentError::EmptyExtraction(what))
}

fn filter(
    raw: Vec<String>,
    db: &DatabaseSchema,
    seeds: &BTreeSet<&str>,
    batch: usize,
    mut stats: BatchStats,
) -> CandidateBatch {
    let mut candidates = Vec::new();
    for sql in raw {
        let Ok(a) = analyze(&sql) else {
            stats.unparseable += 1;
            continue;
        };
        if a.tables.is_empty() || a.tables.iter().any(|t| db.table(t).is_none()) {
            stats.off_schema += 1;
        } else if seeds.contains(a.canonical.as_str()) {
            stats.seed_copies += 1;
        } else if candidates.len() == batch {
            stats.surplus += 1;
        } else {
            candidates.push(a);
        }
    }
    CandidateBatch { candidates, stats }
}

/// Open-ended generation over the selected tables. The prompt carries the
/// joint schema, join paths and content hints, and never any pooled query.
pub fn generate(
    gw: &Gateway,
    db: &DatabaseSchema,
    tables: &[String],
    hints: &BTreeMap<String, ContentHints>,
    batch: usize,
) -> Result<CandidateBatch, AgentError> {
    if tables.is_empty() {
        return Err(AgentError::InvalidInput("generation needs at least one table".into()));
    }
    let schema = render_schema_block(db, tables, hints)?;
    let prompt = prompts::render(prompts::GENERATION, &[("schema", schema.trim_end()), ("n", &batch.to_string())]);
    let mut stats = BatchStats::default();
    let raw = ask(gw, ModelRole::Generator, prompt, &mut stats, "generation")?;
    Ok(filter(raw, db, &BTreeSet::new(), batch, stats))
}

/// Up to `n` pooled queries touching at least one of `tables`, ranked by
/// structural richness (high first), then by how common their exact table
/// set is in the pool (rare first), then by id. Empty when nothing in the
/// pool touches `tables`.
pub fn seed_select(pool: &SqlPool, tables: &[String], n: usize) -> Vec<i64> {
    let wanted: BTreeSet<&str> = tables.iter().map(String::as_str).collect();
    let mut freq: HashMap<&BTreeSet<String>, usize> = HashMap::new();
    for r in pool.records() {
        *freq.entry(&r.tables).or_default() += 1;
    }
    let mut eligible: Vec<&SqlQueryRecord> =
        pool.records().filter(|r| r.tables.iter().any(|t| wanted.contains(t.as_str()))).collect();
    eligible.sort_by(|a, b| {
        b.features
            .richness()
            .cmp(&a.features.richness())
            .then_with(|| freq[&a.tables].cmp(&freq[&b.tables]))
            .then_with(|| a.id.cmp(&b.id))
    });
    eligible.into_iter().take(n).map(|r| r.id).collect()
}

/// Variants of the seed queries. The schema is left for the model to infer
/// from the seeds.
pub fn expand(
    gw: &Gateway,
    db: &DatabaseSchema,
    seeds: &[&SqlQueryRecord],
    batch: usize,
) -> Result<CandidateBatch, AgentError> {
    if seeds.is_empty() {
        return Err(AgentError::InvalidInput("expansion needs at least one seed".into()));
    }
    let listing: Vec<String> =
        seeds.iter().enumerate().map(|(i, s)| format!("Seed {}:\n```sql\n{}\n```", i + 1, s.sql)).collect();
    let prompt = prompts::render(prompts::EXPANSION, &[("seeds", &listing.join("\n")), ("n", &batch.to_string())]);
    let mut stats = BatchStats::default();
    let raw = ask(gw, ModelRole::Expander, prompt, &mut stats, "expansion")?;
    let seed_texts: BTreeSet<&str> = seeds.iter().map(|s| s.normalized_text.as_str()).collect();
    Ok(filter(raw, db, &seed_texts, batch, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{RetryPolicy, ScriptedBackend, ScriptedFixture};
    use crate::pool::{NewQuery, Origin};
    use crate::schema::ingest_ddl;
    use std::sync::Arc;

    fn db() -> DatabaseSchema {
        ingest_ddl(
            "shop",
            "CREATE TABLE a (id INTEGER PRIMARY KEY, v INTEGER);
             CREATE TABLE b (id INTEGER PRIMARY KEY, a_id INTEGER REFERENCES a(id), w INTEGER);
             CREATE TABLE c (id INTEGER PRIMARY KEY, name TEXT);",
        )
        .unwrap()
    }

    fn gateway(role: ModelRole, responses: &[&str]) -> Gateway {
        let mut f = ScriptedFixture::default();
        for (i, r) in responses.iter().enumerate() {
            f.push_sequence(role, i as u64, *r);
        }
        Gateway::new("t", RetryPolicy::default(), 1).with_backend(role, Arc::new(ScriptedBackend::new(f)))
    }

    fn fenced(qs: &[&str]) -> String {
        qs.iter().map(|q| format!("```sql\n{q}\n```\n")).collect()
    }

    fn pool_with(qs: &[&str]) -> SqlPool {
        let mut p = SqlPool::in_memory(2).unwrap();
        for (i, q) in qs.iter().enumerate() {
            p.insert(NewQuery {
                analyzed: analyze(q).unwrap(),
                origin: Origin::Gen,
                round: 0,
                executable: true,
                empty_result: false,
                max_neighbor_sim: None,
                embedding: vec![1.0, i as f64],
            })
            .unwrap();
        }
        p
    }

    #[test]
    fn generation_drops_unparseable() {
        let resp = fenced(&[
            "SELECT a.v, b.w FROM a JOIN b ON a.id = b.a_id",
            "SELECT COUNT(*) FROM b WHERE w > 3",
            "SELECT (v FROM a",
            "SELECT name FROM c WHERE id IN (SELECT a_id FROM b)",
            "SELECT MAX(v) FROM a GROUP BY id",
        ]);
        let gw = gateway(ModelRole::Generator, &[&resp]);
        let out = generate(&gw, &db(), &["a".into(), "b".into()], &BTreeMap::new(), 10).unwrap();
        assert_eq!(out.candidates.len(), 4);
        assert_eq!((out.stats.extracted, out.stats.unparseable), (5, 1));
    }

    #[test]
    fn off_catalog_tables_and_empty_responses() {
        let gw = gateway(ModelRole::Generator, &[&fenced(&["SELECT * FROM ghosts", "SELECT 1"]), "nothing", "still nothing"]);
        let out = generate(&gw, &db(), &["a".into()], &BTreeMap::new(), 5).unwrap();
        assert!(out.candidates.is_empty());
        assert_eq!(out.stats.off_schema, 2);
        assert!(matches!(
            generate(&gw, &db(), &["a".into()], &BTreeMap::new(), 5),
            Err(AgentError::EmptyExtraction("generation"))
        ));
    }

    #[test]
    fn generation_prompt_has_no_pooled_queries() {
        let mut f = ScriptedFixture::default();
        let gw_prompt = {
            let schema = render_schema_block(&db(), &["a".to_string()], &BTreeMap::new()).unwrap();
            prompts::render(prompts::GENERATION, &[("schema", schema.trim_end()), ("n", "3")])
        };
        f.push_prompt(&gw_prompt, fenced(&["SELECT v FROM a WHERE v > 1"]));
        let gw = Gateway::new("t", RetryPolicy::default(), 1)
            .with_backend(ModelRole::Generator, Arc::new(ScriptedBackend::new(f)));
        assert_eq!(generate(&gw, &db(), &["a".into()], &BTreeMap::new(), 3).unwrap().candidates.len(), 1);
        assert!(!gw_prompt.contains("SELECT"));
    }

    #[test]
    fn seeds_intersect_and_rank() {
        let p = pool_with(&[
            "SELECT v FROM a JOIN b ON a.id = b.a_id",
            "SELECT name FROM c",
            "SELECT a.v FROM a JOIN b ON a.id = b.a_id JOIN c ON c.id = b.id WHERE a.v > 1 AND b.w < 3",
            "SELECT v FROM a",
        ]);
        assert_eq!(seed_select(&p, &["b".into()], 10), vec![3, 1]);
        // id 3 is richest, then id 1 with its join, then the bare scan.
        assert_eq!(seed_select(&p, &["a".into()], 10), vec![3, 1, 4]);
        assert!(seed_select(&p, &["zzz".into()], 10).is_empty());
        assert_eq!(seed_select(&p, &["a".into()], 1), vec![3]);
    }

    #[test]
    fn expansion_drops_seed_copies() {
        let p = pool_with(&["SELECT v FROM a WHERE v > 10"]);
        let seed = p.get(1).unwrap();
        let resp = fenced(&[
            "select v from a where v > 10",
            "WITH x AS (SELECT v FROM a) SELECT v FROM x WHERE v > 10",
            "SELECT v AS value FROM a WHERE v > 20",
            "SELECT v FROM a WHERE v > 10 OR v < 2",
        ]);
        let gw = gateway(ModelRole::Expander, &[&resp]);
        let out = expand(&gw, &db(), &[seed], 10).unwrap();
        assert_eq!(out.candidates.len(), 3);
        assert_eq!(out.stats.seed_copies, 1);
        assert!(out.candidates.iter().all(|c| c.canonical != seed.normalized_text));
    }
}
