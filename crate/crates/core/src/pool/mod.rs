//! Durable store of accepted queries (table R) and their embeddings
//! (table E), with an in-memory mirror for retrieval.

mod export;
mod ivf;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use rusqlite::{params, Connection, OptionalExtension, Transaction};
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, AnalyzedQuery, StructuralFeatures};
use crate::similarity::{hybrid_if_at_least, HybridScore, HybridWeights, QueryFingerprint};

pub use export::{ExportFormat, JsonlFeatures, JsonlRecord, CSV_HEADER};
pub use ivf::IvfIndex;

pub const DEFAULT_DIM: usize = 384;
/// Candidates fetched per requested neighbor before hybrid reranking.
pub const CANDIDATE_MULTIPLIER: usize = 20;
const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Origin {
    #[serde(rename = "GEN")]
    Gen,
    #[serde(rename = "EXP")]
    Exp,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Gen => "GEN",
            Origin::Exp => "EXP",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "GEN" => Some(Origin::Gen),
            "EXP" => Some(Origin::Exp),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PoolError {
    #[error("duplicate of query {existing}")]
    Duplicate { existing: i64 },
    #[error("embedding has dimension {got}, pool expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
    #[error("only executable queries may be pooled")]
    NotExecutable,
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("stored query {id} no longer parses: {message}")]
    Corrupt { id: i64, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("injected fault")]
    Injected,
}

impl From<rusqlite::Error> for PoolError {
    fn from(e: rusqlite::Error) -> Self {
        PoolError::Storage(e.to_string())
    }
}

/// One pooled query as stored in table R.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqlQueryRecord {
    pub id: i64,
    pub sql: String,
    pub normalized_text: String,
    pub tables: BTreeSet<String>,
    pub origin: Origin,
    pub round: u32,
    pub features: StructuralFeatures,
    pub executable: bool,
    pub empty_result: bool,
    /// Highest hybrid similarity to the pool at acceptance time, when checked.
    pub max_neighbor_sim: Option<f64>,
    pub created_at: i64,
}

/// A validated query waiting to be pooled.
#[derive(Clone, Debug)]
pub struct NewQuery {
    pub analyzed: AnalyzedQuery,
    pub origin: Origin,
    pub round: u32,
    pub executable: bool,
    pub empty_result: bool,
    pub max_neighbor_sim: Option<f64>,
    pub embedding: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRatio {
    pub ratio: f64,
    /// Set when the pool is empty and the ratio is a placeholder zero.
    pub empty_pool: bool,
}

/// Candidate retrieval strategy for the cosine stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum RetrievalMode {
    #[default]
    Exact,
    Ivf { nlist: usize, nprobe: usize },
}

struct Entry {
    record: SqlQueryRecord,
    fp: QueryFingerprint,
    inv_norm: f64,
}

pub struct SqlPool {
    conn: Mutex<Connection>,
    path: Option<PathBuf>,
    dim: usize,
    entries: Vec<Entry>,
    by_text: HashMap<String, i64>,
    by_id: HashMap<i64, usize>,
    mode: RetrievalMode,
    ivf: Mutex<Option<(IvfIndex, usize)>>,
    fail_between_writes: bool,
}

fn now_millis() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as i64).unwrap_or(0)
}

fn encode_vec(v: &[f64]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn decode_vec(b: &[u8]) -> Vec<f64> {
    b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect()
}

impl SqlPool {
    /// Opens or creates a pool file. An existing pool must match `dim`.
    pub fn open(path: &Path, dim: usize) -> Result<Self, PoolError> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "NORMAL")?;
        Self::init(conn, Some(path.to_path_buf()), dim)
    }

    pub fn in_memory(dim: usize) -> Result<Self, PoolError> {
        Self::init(Connection::open_in_memory()?, None, dim)
    }

    fn init(conn: Connection, path: Option<PathBuf>, dim: usize) -> Result<Self, PoolError> {
        conn.execute_batch(
            "PRAGMA foreign_keys = ON;
             CREATE TABLE IF NOT EXISTS meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
             CREATE TABLE IF NOT EXISTS queries (
                 id INTEGER PRIMARY KEY,
                 sql_text TEXT NOT NULL,
                 normalized_text TEXT NOT NULL UNIQUE,
                 tables TEXT NOT NULL,
                 origin TEXT NOT NULL CHECK (origin IN ('GEN', 'EXP')),
                 round INTEGER NOT NULL CHECK (round >= 0),
                 joins INTEGER NOT NULL,
                 predicates INTEGER NOT NULL,
                 nesting INTEGER NOT NULL,
                 aggregates INTEGER NOT NULL,
                 tokens INTEGER NOT NULL,
                 executable INTEGER NOT NULL CHECK (executable = 1),
                 empty_result INTEGER NOT NULL,
                 max_neighbor_sim REAL,
                 created_at INTEGER NOT NULL
             );
             CREATE INDEX IF NOT EXISTS queries_round ON queries(round);
             CREATE TABLE IF NOT EXISTS embeddings (
                 query_id INTEGER PRIMARY KEY REFERENCES queries(id) ON DELETE CASCADE,
                 dim INTEGER NOT NULL,
                 norm REAL NOT NULL CHECK (norm > 0),
                 vec BLOB NOT NULL
             );",
        )?;
        let stored_dim: Option<String> =
            conn.query_row("SELECT value FROM meta WHERE key = 'dim'", [], |r| r.get(0)).optional()?;
        match stored_dim {
            Some(d) => {
                let d: usize = d.parse().map_err(|_| PoolError::Storage(format!("bad stored dim {d}")))?;
                if d != dim {
                    return Err(PoolError::DimensionMismatch { expected: d, got: dim });
                }
            }
            None => {
                conn.execute("INSERT INTO meta(key, value) VALUES ('dim', ?1)", [dim.to_string()])?;
                conn.execute("INSERT INTO meta(key, value) VALUES ('schema_version', ?1)", [SCHEMA_VERSION])?;
            }
        }
        let mut pool = SqlPool {
            conn: Mutex::new(conn),
            path,
            dim,
            entries: Vec::new(),
            by_text: HashMap::new(),
            by_id: HashMap::new(),
            mode: RetrievalMode::Exact,
            ivf: Mutex::new(None),
            fail_between_writes: false,
        };
        pool.reload()?;
        Ok(pool)
    }

    /// Rebuilds the in-memory mirror from storage. Only rows present in
    /// both R and E are visible.
    fn reload(&mut self) -> Result<(), PoolError> {
        let rows: Vec<(SqlQueryRecord, Vec<f64>)> = {
            let conn = self.conn.lock().expect("pool connection poisoned");
            let mut stmt = conn.prepare(
                "SELECT q.id, q.sql_text, q.normalized_text, q.tables, q.origin, q.round, q.joins, q.predicates,
                        q.nesting, q.aggregates, q.tokens, q.executable, q.empty_result, q.max_neighbor_sim,
                        q.created_at, e.vec
                 FROM queries q JOIN embeddings e ON e.query_id = q.id ORDER BY q.id",
            )?;
            let mapped = stmt.query_map([], |r| {
                let tables: String = r.get(3)?;
                let origin: String = r.get(4)?;
                let blob: Vec<u8> = r.get(15)?;
                Ok((
                    SqlQueryRecord {
                        id: r.get(0)?,
                        sql: r.get(1)?,
                        normalized_text: r.get(2)?,
                        tables: serde_json::from_str(&tables).unwrap_or_default(),
                        origin: Origin::parse(&origin).unwrap_or(Origin::Gen),
                        round: r.get(5)?,
                        features: StructuralFeatures {
                            join_count: r.get::<_, i64>(6)? as usize,
                            predicate_count: r.get::<_, i64>(7)? as usize,
                            nesting_depth: r.get::<_, i64>(8)? as usize,
                            aggregate_count: r.get::<_, i64>(9)? as usize,
                            token_length: r.get::<_, i64>(10)? as usize,
                        },
                        executable: r.get(11)?,
                        empty_result: r.get(12)?,
                        max_neighbor_sim: r.get(13)?,
                        created_at: r.get(14)?,
                    },
                    decode_vec(&blob),
                ))
            })?;
            mapped.collect::<Result<_, _>>()?
        };
        self.entries.clear();
        self.by_text.clear();
        self.by_id.clear();
        for (record, vec) in rows {
            let analyzed =
                analyze(&record.sql).map_err(|e| PoolError::Corrupt { id: record.id, message: e.to_string() })?;
            self.push_entry(record, &analyzed, vec);
        }
        *self.ivf.lock().expect("ivf lock poisoned") = None;
        Ok(())
    }

    fn push_entry(&mut self, record: SqlQueryRecord, analyzed: &AnalyzedQuery, vec: Vec<f64>) {
        let norm = vec.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.by_text.insert(record.normalized_text.clone(), record.id);
        self.by_id.insert(record.id, self.entries.len());
        let fp = QueryFingerprint::from_analyzed(analyzed, vec);
        self.entries.push(Entry { record, fp, inv_norm: 1.0 / norm });
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn set_retrieval_mode(&mut self, mode: RetrievalMode) {
        self.mode = mode;
        *self.ivf.lock().expect("ivf lock poisoned") = None;
    }

    pub fn records(&self) -> impl Iterator<Item = &SqlQueryRecord> {
        self.entries.iter().map(|e| &e.record)
    }

    pub fn get(&self, id: i64) -> Option<&SqlQueryRecord> {
        self.by_id.get(&id).map(|&i| &self.entries[i].record)
    }

    pub fn fingerprint(&self, id: i64) -> Option<&QueryFingerprint> {
        self.by_id.get(&id).map(|&i| &self.entries[i].fp)
    }

    /// Id of the pooled query with this normalized text, if any.
    pub fn find_exact(&self, normalized_text: &str) -> Option<i64> {
        self.by_text.get(normalized_text).copied()
    }

    fn next_id(&self) -> i64 {
        self.entries.last().map_or(1, |e| e.record.id + 1)
    }

    /// Test hook: fail every insert after table R is written and before
    /// table E is, emulating a crash between the two writes.
    #[doc(hidden)]
    pub fn inject_fault_between_writes(&mut self, on: bool) {
        self.fail_between_writes = on;
    }

    fn check(&self, q: &NewQuery) -> Result<(), PoolError> {
        if !q.executable {
            return Err(PoolError::NotExecutable);
        }
        if q.embedding.len() != self.dim {
            return Err(PoolError::DimensionMismatch { expected: self.dim, got: q.embedding.len() });
        }
        let norm2: f64 = q.embedding.iter().map(|x| x * x).sum();
        if !(norm2 > 0.0 && norm2.is_finite()) {
            return Err(PoolError::InvalidEmbedding("zero or non-finite vector".into()));
        }
        if let Some(existing) = self.find_exact(&q.analyzed.canonical) {
            return Err(PoolError::Duplicate { existing });
        }
        Ok(())
    }

    fn write_one(&self, tx: &Transaction<'_>, record: &SqlQueryRecord, vec: &[f64]) -> Result<(), PoolError> {
        let f = &record.features;
        tx.execute(
            "INSERT INTO queries (id, sql_text, normalized_text, tables, origin, round, joins, predicates, nesting,
                                  aggregates, tokens, executable, empty_result, max_neighbor_sim, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12, ?13, ?14, ?15)",
            params![
                record.id,
                record.sql,
                record.normalized_text,
                serde_json::to_string(&record.tables).expect("string set serializes"),
                record.origin.as_str(),
                record.round,
                f.join_count as i64,
                f.predicate_count as i64,
                f.nesting_depth as i64,
                f.aggregate_count as i64,
                f.token_length as i64,
                record.executable,
                record.empty_result,
                record.max_neighbor_sim,
                record.created_at,
            ],
        )?;
        if self.fail_between_writes {
            return Err(PoolError::Injected);
        }
        let norm = vec.iter().map(|x| x * x).sum::<f64>().sqrt();
        tx.execute(
            "INSERT INTO embeddings (query_id, dim, norm, vec) VALUES (?1, ?2, ?3, ?4)",
            params![record.id, vec.len() as i64, norm, encode_vec(vec)],
        )?;
        Ok(())
    }

    fn record_for(&self, id: i64, q: &NewQuery) -> SqlQueryRecord {
        SqlQueryRecord {
            id,
            sql: q.analyzed.sql.clone(),
            normalized_text: q.analyzed.canonical.clone(),
            tables: q.analyzed.tables.clone(),
            origin: q.origin,
            round: q.round,
            features: q.analyzed.features,
            executable: q.executable,
            empty_result: q.empty_result,
            max_neighbor_sim: q.max_neighbor_sim,
            created_at: now_millis(),
        }
    }

    /// Inserts one query into R and E atomically.
    pub fn insert(&mut self, q: NewQuery) -> Result<i64, PoolError> {
        self.insert_batch(vec![q]).pop().expect("one result per input")
    }

    /// Inserts a batch in a single transaction. Rejections (duplicates,
    /// including duplicates within the batch) do not affect the others;
    /// a storage failure rolls back the whole batch.
    pub fn insert_batch(&mut self, batch: Vec<NewQuery>) -> Vec<Result<i64, PoolError>> {
        let mut results: Vec<Result<i64, PoolError>> = Vec::with_capacity(batch.len());
        let mut staged: Vec<(SqlQueryRecord, usize)> = Vec::new();
        let mut batch_texts: HashMap<String, i64> = HashMap::new();
        let mut id = self.next_id();
        for (i, q) in batch.iter().enumerate() {
            let verdict = self.check(q).and_then(|_| match batch_texts.get(&q.analyzed.canonical) {
                Some(&existing) => Err(PoolError::Duplicate { existing }),
                None => Ok(()),
            });
            match verdict {
                Ok(()) => {
                    batch_texts.insert(q.analyzed.canonical.clone(), id);
                    staged.push((self.record_for(id, q), i));
                    results.push(Ok(id));
                    id += 1;
                }
                Err(e) => results.push(Err(e)),
            }
        }
        if staged.is_empty() {
            return results;
        }
        let written = (|| -> Result<(), PoolError> {
            let mut conn = self.conn.lock().expect("pool connection poisoned");
            let tx = conn.transaction()?;
            for (record, i) in &staged {
                self.write_one(&tx, record, &batch[*i].embedding)?;
            }
            tx.commit()?;
            Ok(())
        })();
        if let Err(e) = written {
            let msg = e.to_string();
            let injected = matches!(e, PoolError::Injected);
            for (_, i) in &staged {
                results[*i] = Err(if injected { PoolError::Injected } else { PoolError::Storage(msg.clone()) });
            }
            return results;
        }
        for (record, i) in staged {
            let q = &batch[i];
            self.push_entry(record, &q.analyzed, q.embedding.clone());
        }
        results
    }

    /// Removes every record from `round` onward; used when resuming a run
    /// so the interrupted round replays from its start.
    pub fn truncate_from_round(&mut self, round: u32) -> Result<usize, PoolError> {
        let removed = {
            let mut conn = self.conn.lock().expect("pool connection poisoned");
            let tx = conn.transaction()?;
            tx.execute("DELETE FROM embeddings WHERE query_id IN (SELECT id FROM queries WHERE round >= ?1)", [round])?;
            let n = tx.execute("DELETE FROM queries WHERE round >= ?1", [round])?;
            // Orphans left by a crash between the two writes in older files.
            tx.execute("DELETE FROM queries WHERE id NOT IN (SELECT query_id FROM embeddings)", [])?;
            tx.commit()?;
            n
        };
        self.reload()?;
        Ok(removed)
    }

    /// Row counts of tables R and E as stored.
    pub fn storage_counts(&self) -> Result<(usize, usize), PoolError> {
        let conn = self.conn.lock().expect("pool connection poisoned");
        let r: i64 = conn.query_row("SELECT COUNT(*) FROM queries", [], |r| r.get(0))?;
        let e: i64 = conn.query_row("SELECT COUNT(*) FROM embeddings", [], |r| r.get(0))?;
        Ok((r as usize, e as usize))
    }

    /// Query count per table, zero-filled over `tables`.
    pub fn stats_per_table(&self, tables: &[String]) -> BTreeMap<String, usize> {
        let mut out: BTreeMap<String, usize> = tables.iter().map(|t| (t.clone(), 0)).collect();
        for e in &self.entries {
            for t in &e.record.tables {
                if let Some(c) = out.get_mut(t) {
                    *c += 1;
                }
            }
        }
        out
    }

    pub fn expansion_ratio(&self) -> ExpansionRatio {
        if self.entries.is_empty() {
            return ExpansionRatio { ratio: 0.0, empty_pool: true };
        }
        let exp = self.entries.iter().filter(|e| e.record.origin == Origin::Exp).count();
        ExpansionRatio { ratio: exp as f64 / self.entries.len() as f64, empty_pool: false }
    }

    /// SHA-256 over `(id, origin, round, normalized_text)` of every record in id order.
    pub fn content_hash(&self) -> String {
        let mut text = String::new();
        for e in &self.entries {
            let r = &e.record;
            text.push_str(&format!("{}\t{}\t{}\t{}\n", r.id, r.origin.as_str(), r.round, r.normalized_text));
        }
        crate::util::sha256_hex(&text)
    }

    /// Ids of the `m` pooled queries with the highest cosine to `vector`,
    /// best first, ties broken by lower id.
    pub fn ann_candidates(&self, vector: &[f64], m: usize) -> Vec<(i64, f64)> {
        if self.entries.is_empty() || m == 0 {
            return Vec::new();
        }
        let qn = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(qn > 0.0) || vector.len() != self.dim {
            return Vec::new();
        }
        match self.mode {
            RetrievalMode::Exact => self.exact_candidates(vector, qn, m),
            RetrievalMode::Ivf { nlist, nprobe } => self.ivf_candidates(vector, qn, m, nlist, nprobe),
        }
    }

    fn cosine(&self, e: &Entry, vector: &[f64], qn: f64) -> f64 {
        let dot: f64 = e.fp.embedding.iter().zip(vector).map(|(a, b)| a * b).sum();
        dot * e.inv_norm / qn
    }

    fn exact_candidates(&self, vector: &[f64], qn: f64, m: usize) -> Vec<(i64, f64)> {
        let mut scored: Vec<(i64, f64)> =
            self.entries.par_iter().map(|e| (e.record.id, self.cosine(e, vector, qn))).collect();
        top_m(&mut scored, m);
        scored
    }

    fn ivf_candidates(&self, vector: &[f64], qn: f64, m: usize, nlist: usize, nprobe: usize) -> Vec<(i64, f64)> {
        let mut guard = self.ivf.lock().expect("ivf lock poisoned");
        // Rebuild once the pool has doubled since the last build.
        let stale = guard.as_ref().is_none_or(|(_, built)| self.entries.len() >= 2 * *built);
        if stale {
            let rows: Vec<&[f64]> = self.entries.iter().map(|e| e.fp.embedding.as_slice()).collect();
            *guard = Some((IvfIndex::build(&rows, nlist, 0x5eed), self.entries.len()));
        }
        let (index, built) = guard.as_ref().expect("index just built");
        let mut scored: Vec<(i64, f64)> = index
            .probe(vector, nprobe)
            .into_iter()
            .chain(*built..self.entries.len())
            .map(|i| {
                let e = &self.entries[i];
                (e.record.id, self.cosine(e, vector, qn))
            })
            .collect();
        top_m(&mut scored, m);
        scored
    }

    /// Top-k pooled queries by hybrid similarity among the `k × 20`
    /// cosine candidates, best first, ties broken by lower id.
    pub fn top_k_hybrid(&self, query: &QueryFingerprint, k: usize, w: &HybridWeights) -> Vec<(i64, HybridScore)> {
        let candidates = self.ann_candidates(&query.embedding, k * CANDIDATE_MULTIPLIER);
        self.rerank(query, candidates.into_iter().map(|(id, _)| id), k, w)
    }

    /// The single best of [`Self::top_k_hybrid`]'s candidates. Same answer
    /// as its first entry, with far fewer tree distances.
    pub fn nearest_hybrid(&self, query: &QueryFingerprint, k: usize, w: &HybridWeights) -> Option<(i64, HybridScore)> {
        let candidates = self.ann_candidates(&query.embedding, k * CANDIDATE_MULTIPLIER);
        self.rerank(query, candidates.into_iter().map(|(id, _)| id), 1, w).into_iter().next()
    }

    /// Hybrid rerank of the given ids. Candidates are visited in order of
    /// their cheap upper bound so most AST distances are never computed.
    pub fn rerank(
        &self,
        query: &QueryFingerprint,
        ids: impl IntoIterator<Item = i64>,
        k: usize,
        w: &HybridWeights,
    ) -> Vec<(i64, HybridScore)> {
        if k == 0 {
            return Vec::new();
        }
        let mut bounded: Vec<(i64, f64, &QueryFingerprint)> = ids
            .into_iter()
            .filter_map(|id| self.fingerprint(id).map(|fp| (id, fp)))
            .filter_map(|(id, fp)| {
                let t = crate::similarity::sim_tok_sorted(&query.sorted_tokens, &fp.sorted_tokens).ok()?;
                let e = crate::similarity::sim_emb(&query.embedding, &fp.embedding).ok()?;
                Some((id, w.combine(t, crate::similarity::sim_ast_upper_bound(&query.ast, &fp.ast), e), fp))
            })
            .collect();
        bounded.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut best: Vec<(i64, HybridScore)> = Vec::with_capacity(k + 1);
        for (id, bound, fp) in bounded {
            let floor = if best.len() == k { best[k - 1].1.combined } else { f64::NEG_INFINITY };
            if bound < floor {
                break;
            }
            if let Ok(Some(score)) = hybrid_if_at_least(query, fp, w, floor) {
                best.push((id, score));
                best.sort_by(|a, b| cmp_scored(a.0, a.1.combined, b.0, b.1.combined));
                best.truncate(k);
            }
        }
        best
    }

    /// Re-analyzes every stored query and reports those whose stored
    /// features or tables no longer match.
    pub fn verify_consistency(&self) -> Vec<i64> {
        self.entries
            .par_iter()
            .filter(|e| match analyze(&e.record.sql) {
                Ok(a) => {
                    a.features != e.record.features
                        || a.tables != e.record.tables
                        || a.canonical != e.record.normalized_text
                }
                Err(_) => true,
            })
            .map(|e| e.record.id)
            .collect()
    }
}

fn cmp_scored(id_a: i64, a: f64, id_b: i64, b: f64) -> Ordering {
    b.total_cmp(&a).then(id_a.cmp(&id_b))
}

fn top_m(scored: &mut Vec<(i64, f64)>, m: usize) {
    let by = |a: &(i64, f64), b: &(i64, f64)| cmp_scored(a.0, a.1, b.0, b.1);
    if scored.len() > m {
        scored.select_nth_unstable_by(m - 1, by);
        scored.truncate(m);
    }
    scored.sort_by(by);
}
