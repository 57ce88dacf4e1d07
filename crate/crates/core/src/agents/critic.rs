//! Critical Agent: execution check, redundancy retrieval, pool insertion.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AgentError, Phase};
use crate::analysis::AnalyzedQuery;
use crate::exec::{ErrorClass, ExecutionTool};
use crate::llm::TextEncoder;
use crate::pool::{NewQuery, SqlPool};
use crate::similarity::{hybrid_if_at_least, HybridWeights, QueryFingerprint};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticConfig {
    /// Pool neighbours retrieved per candidate.
    pub k: usize,
    /// Expansion candidates at or above this hybrid similarity are rejected.
    pub theta_sim: f64,
    pub weights: HybridWeights,
    /// Concurrent execution checks.
    pub parallelism: usize,
}

impl Default for CriticConfig {
    fn default() -> Self {
        CriticConfig { k: 10, theta_sim: 0.9, weights: HybridWeights::default(), parallelism: 4 }
    }
}

/// Where the nearest neighbour lives: the pool, or an earlier candidate
/// accepted in the same batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborRef {
    Pool(i64),
    Batch(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Accepted { id: i64 },
    NotExecutable { error_class: ErrorClass, message: String },
    Duplicate { of: NeighborRef },
    TooSimilar { of: NeighborRef, score: f64 },
    /// The harness or encoder failed on this query.
    Error { cause: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryVerdict {
    pub sql: String,
    #[serde(flatten)]
    pub verdict: Verdict,
    /// Highest hybrid similarity to the retrieved pool neighbours and the
    /// earlier accepted candidates; absent when the query never got that far.
    pub max_neighbor_sim: Option<f64>,
    pub empty_result: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub round: u32,
    pub phase: Phase,
    pub batch_size: usize,
    pub executable_fraction: f64,
    pub accepted: usize,
    pub rejected_duplicate: usize,
    pub rejected_similarity: usize,
    pub non_executable: usize,
    pub errors: usize,
    /// Mean over executable candidates of their max neighbour similarity;
    /// exact duplicates count as 1.
    pub mean_max_neighbor_similarity: f64,
    pub verdicts: Vec<QueryVerdict>,
}

impl EvaluationReport {
    /// Report for a round that produced no candidates.
    pub fn empty(round: u32, phase: Phase) -> Self {
        EvaluationReport {
            round,
            phase,
            batch_size: 0,
            executable_fraction: 0.0,
            accepted: 0,
            rejected_duplicate: 0,
            rejected_similarity: 0,
            non_executable: 0,
            errors: 0,
            mean_max_neighbor_similarity: 0.0,
            verdicts: Vec::new(),
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.batch_size == 0 {
            0.0
        } else {
            self.accepted as f64 / self.batch_size as f64
        }
    }

    pub fn accepted_ids(&self) -> Vec<i64> {
        self.verdicts
            .iter()
            .filter_map(|v| match v.verdict {
                Verdict::Accepted { id } => Some(id),
                _ => None,
            })
            .collect()
    }
}

struct Staged {
    analyzed: AnalyzedQuery,
    fp: QueryFingerprint,
    empty_result: bool,
    pool_exact: Option<i64>,
    pool_best: Option<(i64, f64)>,
}

/// Judges a batch and inserts the survivors. In GEN only executability
/// counts; in EXP a candidate must also be no exact duplicate and stay
/// below `theta_sim` against its retrieved pool neighbours and everything
/// accepted earlier in the batch. Candidates are decided in input order.
pub fn critical_evaluate(
    batch: Vec<AnalyzedQuery>,
    phase: Phase,
    round: u32,
    cfg: &CriticConfig,
    pool: &mut SqlPool,
    harness: &dyn ExecutionTool,
    encoder: &dyn TextEncoder,
) -> Result<EvaluationReport, AgentError> {
    let mut report = EvaluationReport::empty(round, phase);
    report.batch_size = batch.len();
    if batch.is_empty() {
        return Ok(report);
    }
    let sqls: Vec<String> = batch.iter().map(|a| a.sql.clone()).collect();
    let exec = harness.check_batch(&sqls, cfg.parallelism);

    // Executable candidates get embedded and their pool neighbours looked up
    // in parallel; the pool is not modified until the end.
    let pool_ref: &SqlPool = pool;
    let staged: Vec<Result<Staged, QueryVerdict>> = batch
        .into_par_iter()
        .zip(exec)
        .map(|(analyzed, verdict)| {
            let fail = |verdict: Verdict| QueryVerdict {
                sql: analyzed.sql.clone(),
                verdict,
                max_neighbor_sim: None,
                empty_result: false,
            };
            let v = match verdict {
                Ok(v) => v,
                Err(e) => return Err(fail(Verdict::Error { cause: e.to_string() })),
            };
            if !v.executable {
                let message = v.message.unwrap_or_default();
                return Err(fail(Verdict::NotExecutable { error_class: v.error_class, message }));
            }
            let embedding = match encoder.encode(&analyzed.sql) {
                Ok(e) => e,
                Err(e) => return Err(fail(Verdict::Error { cause: e.to_string() })),
            };
            let fp = QueryFingerprint::from_analyzed(&analyzed, embedding);
            let pool_exact = pool_ref.find_exact(&analyzed.canonical);
            let pool_best = match pool_exact {
                Some(id) => Some((id, 1.0)),
                None => pool_ref.nearest_hybrid(&fp, cfg.k, &cfg.weights).map(|(id, s)| (id, s.combined)),
            };
            Ok(Staged { analyzed, fp, empty_result: v.empty_result, pool_exact, pool_best })
        })
        .collect();

    let mut accepted: Vec<(usize, Staged)> = Vec::new();
    let mut accepted_texts: HashSet<String> = HashSet::new();
    let mut sims = Vec::new();
    let mut verdicts: Vec<Option<QueryVerdict>> = Vec::with_capacity(staged.len());
    for (i, s) in staged.into_iter().enumerate() {
        let s = match s {
            Ok(s) => s,
            Err(v) => {
                match v.verdict {
                    Verdict::Error { .. } => report.errors += 1,
                    _ => report.non_executable += 1,
                }
                verdicts.push(Some(v));
                continue;
            }
        };
        let mut best: Option<(NeighborRef, f64)> = s.pool_best.map(|(id, sim)| (NeighborRef::Pool(id), sim));
        let verdict = if let Some(of) = exact_duplicate(&s, &accepted, &accepted_texts) {
            best = Some((of, 1.0));
            Some(Verdict::Duplicate { of })
        } else {
            for (j, other) in &accepted {
                // Only a strictly better neighbour matters, so the running best
                // is a valid floor.
                let floor = best.map_or(f64::NEG_INFINITY, |(_, b)| b);
                let sim = hybrid_if_at_least(&s.fp, &other.fp, &cfg.weights, floor)
                    .map_err(|e| AgentError::InvalidInput(e.to_string()))?;
                if let Some(sim) = sim.filter(|sim| best.is_none_or(|(_, b)| sim.combined > b)) {
                    best = Some((NeighborRef::Batch(*j), sim.combined));
                }
            }
            match best {
                Some((of, score)) if phase == Phase::Exp && score >= cfg.theta_sim => {
                    Some(Verdict::TooSimilar { of, score })
                }
                _ => None,
            }
        };
        let max_sim = best.map_or(0.0, |(_, s)| s);
        sims.push(max_sim);
        let qv = QueryVerdict {
            sql: s.analyzed.sql.clone(),
            verdict: Verdict::Error { cause: String::new() },
            max_neighbor_sim: Some(max_sim),
            empty_result: s.empty_result,
        };
        match verdict {
            Some(v) => {
                match v {
                    Verdict::Duplicate { .. } => report.rejected_duplicate += 1,
                    _ => report.rejected_similarity += 1,
                }
                verdicts.push(Some(QueryVerdict { verdict: v, ..qv }));
            }
            None => {
                accepted_texts.insert(s.analyzed.canonical.clone());
                accepted.push((i, s));
                // Filled in once the pool assigns an id.
                verdicts.push(Some(qv));
            }
        }
    }

    let new: Vec<NewQuery> = accepted
        .iter()
        .map(|(i, s)| NewQuery {
            analyzed: s.analyzed.clone(),
            origin: phase,
            round,
            executable: true,
            empty_result: s.empty_result,
            max_neighbor_sim: verdicts[*i].as_ref().and_then(|v| v.max_neighbor_sim),
            embedding: s.fp.embedding.clone(),
        })
        .collect();
    for ((i, _), res) in accepted.iter().zip(pool.insert_batch(new)) {
        let id = res?;
        verdicts[*i].as_mut().expect("verdict staged").verdict = Verdict::Accepted { id };
        report.accepted += 1;
    }

    let executable = report.batch_size - report.non_executable - report.errors;
    report.executable_fraction = executable as f64 / report.batch_size as f64;
    report.mean_max_neighbor_similarity =
        if sims.is_empty() { 0.0 } else { sims.iter().sum::<f64>() / sims.len() as f64 };
    report.verdicts = verdicts.into_iter().map(|v| v.expect("every candidate judged")).collect();
    Ok(report)
}

fn exact_duplicate(s: &Staged, accepted: &[(usize, Staged)], texts: &HashSet<String>) -> Option<NeighborRef> {
    if let Some(id) = s.pool_exact {
        return Some(NeighborRef::Pool(id));
    }
    if !texts.contains(&s.analyzed.canonical) {
        return None;
    }
    accepted.iter().find(|(_, o)| o.analyzed.canonical == s.analyzed.canonical).map(|(j, _)| NeighborRef::Batch(*j))
}
