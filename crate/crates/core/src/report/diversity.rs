//! Corpus-level diversity: mean pairwise hybrid similarity and Vendi score.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::similarity::{hybrid, vendi_score_embeddings, HybridWeights, QueryFingerprint};

/// Above this many pairs the mean is estimated from a sample.
pub const EXACT_PAIR_LIMIT: u64 = 2_000_000;
pub const DEFAULT_SAMPLE_PAIRS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum PairMethod {
    Exact,
    /// Pairs drawn uniformly with replacement from all unordered pairs.
    Sampled { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSummary {
    #[serde(flatten)]
    pub method: PairMethod,
    pub corpus_size: usize,
    pub pairs: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p95: f64,
    pub max: f64,
}

/// Nearest-rank quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Mean and quantiles of the hybrid score over pairs of distinct corpus
/// entries. Every pair is scored when there are at most
/// [`EXACT_PAIR_LIMIT`] of them and no smaller `sample_pairs` was asked for;
/// otherwise `sample_pairs` (default [`DEFAULT_SAMPLE_PAIRS`]) pairs are drawn
/// with a generator seeded by `seed`.
pub fn pairwise_similarity_summary(
    fps: &[QueryFingerprint],
    w: &HybridWeights,
    sample_pairs: Option<usize>,
    seed: u64,
) -> Result<PairwiseSummary, ReportError> {
    let n = fps.len();
    if n < 2 {
        return Err(ReportError::TooSmall(n));
    }
    let total = (n as u64) * (n as u64 - 1) / 2;
    let sample = match sample_pairs {
        Some(m) if (m as u64) < total => Some(m.max(1)),
        _ if total > EXACT_PAIR_LIMIT => Some(sample_pairs.unwrap_or(DEFAULT_SAMPLE_PAIRS).max(1)),
        _ => None,
    };
    let (method, pairs): (PairMethod, Vec<(usize, usize)>) = match sample {
        None => (PairMethod::Exact, (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect()),
        Some(m) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let drawn = (0..m)
                .map(|_| {
                    let i = rng.random_range(0..n);
                    let mut j = rng.random_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    (i.min(j), i.max(j))
                })
                .collect();
            (PairMethod::Sampled { seed }, drawn)
        }
    };
    let mut scores = pairs
        .par_iter()
        .map(|&(i, j)| hybrid(&fps[i], &fps[j], w).map(|s| s.combined))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| ReportError::Similarity(e.to_string()))?;
    let m = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / m;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / m;
    scores.sort_by(f64::total_cmp);
    Ok(PairwiseSummary {
        method,
        corpus_size: n,
        pairs: scores.len(),
        mean,
        std_dev: var.sqrt(),
        min: scores[0],
        p25: quantile(&scores, 0.25),
        median: quantile(&scores, 0.5),
        p75: quantile(&scores, 0.75),
        p95: quantile(&scores, 0.95),
        max: scores[scores.len() - 1],
    })
}

/// Vendi score of the cosine Gram matrix of the embeddings.
pub fn corpus_vendi(fps: &[QueryFingerprint]) -> Result<f64, ReportError> {
    let rows: Vec<Vec<f64>> = fps.iter().map(|f| f.embedding.clone()).collect();
    vendi_score_embeddings(&rows).map_err(|e| ReportError::Similarity(e.to_string()))
}
