//! Token, AST and embedding similarities, their weighted hybrid, and the
//! Vendi diversity score.

mod ted;
mod vendi;

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalyzedQuery, QueryAst};

pub use ted::{postorder_distance, tree_edit_distance};
pub use vendi::{normalized_eigenvalues, vendi_score, vendi_score_embeddings, vendi_score_rows, MATRIX_TOLERANCE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimilarityError {
    #[error("undefined input: {0}")]
    UndefinedInput(&'static str),
    #[error("invalid vector: {0}")]
    InvalidVector(String),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("matrix is not positive semi-definite (eigenvalue {0})")]
    NotPositiveSemidefinite(f64),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

/// Weights of the token, AST and embedding components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for HybridWeights {
    fn default() -> Self {
        Self { alpha: 0.6, beta: 0.3, gamma: 0.1 }
    }
}

impl HybridWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, SimilarityError> {
        let w = Self { alpha, beta, gamma };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), SimilarityError> {
        let parts = [self.alpha, self.beta, self.gamma];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(SimilarityError::InvalidWeights(format!("{self:?} has a negative component")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(SimilarityError::InvalidWeights(format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Weighted combination. Computed as one minus the weighted
    /// dissimilarity so that three perfect components give exactly 1.
    pub fn combine(&self, sim_tok: f64, sim_ast: f64, sim_emb: f64) -> f64 {
        let dissim = self.alpha * (1.0 - sim_tok) + self.beta * (1.0 - sim_ast) + self.gamma * (1.0 - sim_emb);
        (1.0 - dissim).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridScore {
    pub sim_tok: f64,
    pub sim_ast: f64,
    pub sim_emb: f64,
    pub combined: f64,
}

/// Pre-digested comparison inputs for one query.
#[derive(Clone, Debug)]
pub struct QueryFingerprint {
    pub sorted_tokens: Vec<String>,
    pub ast: QueryAst,
    pub embedding: Vec<f64>,
}

impl QueryFingerprint {
    pub fn new(tokens: &[String], ast: QueryAst, embedding: Vec<f64>) -> Self {
        let mut sorted_tokens = tokens.to_vec();
        sorted_tokens.sort_unstable();
        Self { sorted_tokens, ast, embedding }
    }

    pub fn from_analyzed(q: &AnalyzedQuery, embedding: Vec<f64>) -> Self {
        Self::new(&q.tokens, q.ast.clone(), embedding)
    }
}

/// Token similarity: sort both sequences, then one minus the Levenshtein
/// distance normalized by the longer length.
pub fn sim_tok(a: &[String], b: &[String]) -> Result<f64, SimilarityError> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    sim_tok_sorted(&a, &b)
}

pub fn sim_tok_sorted(a: &[String], b: &[String]) -> Result<f64, SimilarityError> {
    if a.is_empty() || b.is_empty() {
        return Err(SimilarityError::UndefinedInput("empty token sequence"));
    }
    let d = levenshtein(a, b);
    Ok((1.0 - d as f64 / a.len().max(b.len()) as f64).clamp(0.0, 1.0))
}

fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// AST similarity: one minus tree edit distance over the larger node count.
pub fn sim_ast(a: &QueryAst, b: &QueryAst) -> f64 {
    let denom = a.len().max(b.len());
    if denom == 0 {
        return 1.0;
    }
    // Integer subtraction first keeps the bound below consistent to the ulp.
    let d = tree_edit_distance(a, b);
    denom.saturating_sub(d) as f64 / denom as f64
}

/// Upper bound on [`sim_ast`] from label multisets alone.
pub fn sim_ast_upper_bound(a: &QueryAst, b: &QueryAst) -> f64 {
    let denom = a.len().max(b.len());
    if denom == 0 {
        return 1.0;
    }
    ted::common_labels(a.postorder(), b.postorder()) as f64 / denom as f64
}

/// Cosine similarity clamped to `[0, 1]`.
pub fn sim_emb(a: &[f64], b: &[f64]) -> Result<f64, SimilarityError> {
    if a.len() != b.len() {
        return Err(SimilarityError::InvalidVector(format!("dimension mismatch: {} vs {}", a.len(), b.len())));
    }
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if !(na > 0.0 && nb > 0.0) || !na.is_finite() || !nb.is_finite() {
        return Err(SimilarityError::InvalidVector("zero or non-finite vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    // sqrt(na * nb) instead of sqrt(na) * sqrt(nb): exact 1.0 on identical inputs.
    Ok((dot / (na * nb).sqrt()).clamp(0.0, 1.0))
}

/// Hybrid similarity of two fingerprints.
pub fn hybrid(a: &QueryFingerprint, b: &QueryFingerprint, w: &HybridWeights) -> Result<HybridScore, SimilarityError> {
    let t = sim_tok_sorted(&a.sorted_tokens, &b.sorted_tokens)?;
    let e = sim_emb(&a.embedding, &b.embedding)?;
    let s = sim_ast(&a.ast, &b.ast);
    Ok(HybridScore { sim_tok: t, sim_ast: s, sim_emb: e, combined: w.combine(t, s, e) })
}

/// Cheap components first; returns `None` when even the best AST score the
/// label multisets allow could not reach `floor`.
pub fn hybrid_if_at_least(
    a: &QueryFingerprint,
    b: &QueryFingerprint,
    w: &HybridWeights,
    floor: f64,
) -> Result<Option<HybridScore>, SimilarityError> {
    let t = sim_tok_sorted(&a.sorted_tokens, &b.sorted_tokens)?;
    let e = sim_emb(&a.embedding, &b.embedding)?;
    if w.combine(t, 1.0, e) < floor || w.combine(t, sim_ast_upper_bound(&a.ast, &b.ast), e) < floor {
        return Ok(None);
    }
    let s = sim_ast(&a.ast, &b.ast);
    Ok(Some(HybridScore { sim_tok: t, sim_ast: s, sim_emb: e, combined: w.combine(t, s, e) }))
}
