//! Workload statistics over a pool or an external SQL corpus.

mod corpus;
mod diversity;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use corpus::{Corpus, CorpusItem, Unparseable};
pub use diversity::{
    corpus_vendi, pairwise_similarity_summary, PairMethod, PairwiseSummary, DEFAULT_SAMPLE_PAIRS, EXACT_PAIR_LIMIT,
};

use crate::llm::TextEncoder;
use crate::schema::{profile_all, DatabaseSchema};
use crate::similarity::{HybridWeights, QueryFingerprint};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("io: {0}")]
    Io(String),
    #[error("need at least 2 queries, got {0}")]
    TooSmall(usize),
    #[error("similarity: {0}")]
    Similarity(String),
}

/// Counts keyed by the lower edge of each bin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: usize,
    pub bins: BTreeMap<usize, usize>,
}

impl Histogram {
    pub fn from_values(values: impl IntoIterator<Item = usize>, bin_width: usize) -> Self {
        let bin_width = bin_width.max(1);
        let mut bins = BTreeMap::new();
        for v in values {
            *bins.entry(v / bin_width * bin_width).or_insert(0) += 1;
        }
        Histogram { bin_width, bins }
    }

    pub fn total(&self) -> usize {
        self.bins.values().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCoverage {
    pub table: String,
    pub queries: usize,
    /// Absent for tables the schema does not know.
    pub complexity: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub token_bin_width: usize,
    /// Compute the pairwise summary and Vendi score.
    pub diversity: bool,
    pub sample_pairs: Option<usize>,
    pub seed: u64,
    pub weights: HybridWeights,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { token_bin_width: 10, diversity: true, sample_pairs: None, seed: 0, weights: HybridWeights::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadReport {
    pub corpus_size: usize,
    pub unparseable: usize,
    pub unparseable_entries: Vec<Unparseable>,
    pub join_count: Histogram,
    pub predicate_count: Histogram,
    pub nesting_depth: Histogram,
    pub aggregate_count: Histogram,
    pub token_length: Histogram,
    /// Queries with a known execution outcome.
    pub executed: usize,
    pub executable_fraction: Option<f64>,
    /// Share of executable queries that returned no rows.
    pub empty_result_fraction: Option<f64>,
    pub per_table: Vec<TableCoverage>,
    /// Spearman correlation between per-table query counts and complexity.
    pub coverage_complexity_correlation: Option<f64>,
    pub pairwise_similarity: Option<PairwiseSummary>,
    pub vendi_score: Option<f64>,
}

/// Average ranks, 1-based, ties sharing the mean of their positions.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

fn fraction(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Builds the report. Per-table rows cover every schema table (zero-filled)
/// plus any other table the corpus references.
pub fn workload_report(
    corpus: &Corpus,
    schema: Option<&DatabaseSchema>,
    encoder: &dyn TextEncoder,
    opts: &ReportOptions,
) -> Result<WorkloadReport, ReportError> {
    let feats: Vec<_> = corpus.items.iter().map(|i| i.analyzed.features).collect();
    let hist = |f: fn(&crate::analysis::StructuralFeatures) -> usize, w: usize| Histogram::from_values(feats.iter().map(f), w);

    let outcomes: Vec<(bool, bool)> = corpus.items.iter().filter_map(|i| i.outcome).collect();
    let executable = outcomes.iter().filter(|o| o.0).count();
    let empty = outcomes.iter().filter(|o| o.0 && o.1).count();

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    if let Some(db) = schema {
        for t in db.table_names() {
            counts.insert(t, 0);
        }
    }
    for item in &corpus.items {
        for t in &item.analyzed.tables {
            *counts.entry(t.clone()).or_insert(0) += 1;
        }
    }
    let complexity: BTreeMap<String, usize> = schema
        .map(|db| profile_all(db, &BTreeMap::new()).into_iter().map(|p| (p.table, p.complexity)).collect())
        .unwrap_or_default();
    let per_table: Vec<TableCoverage> = counts
        .into_iter()
        .map(|(table, queries)| TableCoverage { complexity: complexity.get(&table).copied(), table, queries })
        .collect();
    let known: Vec<&TableCoverage> = per_table.iter().filter(|t| t.complexity.is_some()).collect();
    let correlation = spearman(
        &known.iter().map(|t| t.queries as f64).collect::<Vec<_>>(),
        &known.iter().map(|t| t.complexity.unwrap_or(0) as f64).collect::<Vec<_>>(),
    );

    let (pairwise, vendi) = if opts.diversity && corpus.len() >= 2 {
        let fps = fingerprints(corpus, encoder)?;
        (
            Some(pairwise_similarity_summary(&fps, &opts.weights, opts.sample_pairs, opts.seed)?),
            Some(corpus_vendi(&fps)?),
        )
    } else {
        (None, None)
    };

    Ok(WorkloadReport {
        corpus_size: corpus.len(),
        unparseable: corpus.unparseable.len(),
        unparseable_entries: corpus.unparseable.clone(),
        join_count: hist(|f| f.join_count, 1),
        predicate_count: hist(|f| f.predicate_count, 1),
        nesting_depth: hist(|f| f.nesting_depth, 1),
        aggregate_count: hist(|f| f.aggregate_count, 1),
        token_length: hist(|f| f.token_length, opts.token_bin_width),
        executed: outcomes.len(),
        executable_fraction: fraction(executable, outcomes.len()),
        empty_result_fraction: fraction(empty, executable),
        per_table,
        coverage_complexity_correlation: correlation,
        pairwise_similarity: pairwise,
        vendi_score: vendi,
    })
}

/// Fingerprints for similarity work, embedding each query with `encoder`.
pub fn fingerprints(corpus: &Corpus, encoder: &dyn TextEncoder) -> Result<Vec<QueryFingerprint>, ReportError> {
    corpus
        .items
        .iter()
        .map(|i| {
            let e = encoder.encode(&i.analyzed.sql).map_err(|e| ReportError::Similarity(format!("{}: {e}", i.source)))?;
            Ok(QueryFingerprint::from_analyzed(&i.analyzed, e))
        })
        .collect()
}

impl WorkloadReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report always serializes")
    }

    /// Long-format histogram rows: `metric,bin,count`.
    pub fn write_histograms_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "bin", "count"])?;
        for (name, h) in [
            ("join_count", &self.join_count),
            ("predicate_count", &self.predicate_count),
            ("nesting_depth", &self.nesting_depth),
            ("aggregate_count", &self.aggregate_count),
            ("token_length", &self.token_length),
        ] {
            for (bin, count) in &h.bins {
                w.write_record([name, &bin.to_string(), &count.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_tables_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["table", "queries", "complexity"])?;
        for t in &self.per_table {
            w.write_record([t.table.clone(), t.queries.to_string(), t.complexity.map(|c| c.to_string()).unwrap_or_default()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::FallbackEncoder;

    #[test]
    fn histograms_hold_the_whole_corpus() {
        let c = Corpus::from_sql_text(
            "SELECT a FROM t; SELECT t.a FROM t JOIN u ON t.id = u.id WHERE u.b > 3 AND u.c < 2; SELECT COUNT(*) FROM t WHERE a IN (SELECT a FROM u)",
            "h",
        );
        let r = workload_report(&c, None, &FallbackEncoder, &ReportOptions::default()).unwrap();
        assert_eq!(r.corpus_size, 3);
        for h in [&r.join_count, &r.predicate_count, &r.nesting_depth, &r.aggregate_count, &r.token_length] {
            assert_eq!(h.total(), 3);
        }
        assert_eq!(r.join_count.bins, BTreeMap::from([(0, 2), (1, 1)]));
        assert_eq!(r.nesting_depth.bins, BTreeMap::from([(0, 2), (1, 1)]));
        assert_eq!(r.per_table, vec![
            TableCoverage { table: "t".into(), queries: 3, complexity: None },
            TableCoverage { table: "u".into(), queries: 2, complexity: None },
        ]);
        assert_eq!((r.executed, r.empty_result_fraction), (0, None));
        assert!(r.pairwise_similarity.is_some() && r.vendi_score.is_some());
    }

    #[test]
    fn spearman_matches_known_values() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        // Ties get average ranks: x ranks (1.5, 1.5, 3), y ranks (1, 2, 3).
        let r = spearman(&[5.0, 5.0, 9.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r - 0.75f64.sqrt()).abs() < 1e-12, "{r}");
    }

    #[test]
    fn token_bins_use_lower_edges() {
        let h = Histogram::from_values([0, 9, 10, 25, 29], 10);
        assert_eq!(h.bins, BTreeMap::from([(0, 2), (10, 1), (20, 2)]));
    }
}
