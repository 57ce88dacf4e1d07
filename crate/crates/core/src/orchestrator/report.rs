use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{OrchestratorError, RunConfig, SchedulerState, StopReason, TimelineEntry};
use crate::llm::{Gateway, ModelRole, RoleUsage};
use crate::pool::SqlPool;

pub const SERIES_HEADER: [&str; 5] = ["round", "phase", "expansion_ratio", "rolling_similarity", "acceptance_rate"];

/// Summary of a finished run. Gateway usage covers only the last process
/// when the run was resumed; `tokens_used` covers the whole run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub seed: u64,
    pub stop_reason: StopReason,
    pub rounds: u32,
    pub target_query_count: usize,
    pub final_pool_size: usize,
    pub gen_queries: usize,
    pub exp_queries: usize,
    pub alternations: usize,
    pub timeline: Vec<TimelineEntry>,
    pub acceptance_rates: Vec<f64>,
    pub expansion_ratio_series: Vec<f64>,
    pub rolling_similarity_series: Vec<f64>,
    pub gateway_usage: BTreeMap<ModelRole, RoleUsage>,
    pub tokens_used: u64,
    pub pool_hash: String,
}

impl RunReport {
    pub fn build(cfg: &RunConfig, state: &SchedulerState, stop: StopReason, pool: &SqlPool, gw: &Gateway) -> Self {
        let exp_queries = pool.records().filter(|r| r.origin == crate::pool::Origin::Exp).count();
        RunReport {
            run_id: cfg.run_id.clone(),
            seed: cfg.seed,
            stop_reason: stop,
            rounds: state.round,
            target_query_count: cfg.target_query_count,
            final_pool_size: pool.len(),
            gen_queries: pool.len() - exp_queries,
            exp_queries,
            alternations: state.alternations(),
            timeline: state.timeline.clone(),
            acceptance_rates: state.report_history.iter().map(|r| r.acceptance_rate()).collect(),
            expansion_ratio_series: state.expansion_ratio_series.clone(),
            rolling_similarity_series: state.rolling_similarity_series.clone(),
            gateway_usage: gw.usage(),
            tokens_used: state.tokens_used,
            pool_hash: pool.content_hash(),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<(), OrchestratorError> {
        let text = serde_json::to_string_pretty(self).expect("report always serializes");
        std::fs::write(path, text + "\n").map_err(|e| OrchestratorError::io(path, e))
    }

    /// One row per round, in the column order of [`SERIES_HEADER`].
    pub fn write_series_csv(&self, path: &Path) -> Result<(), OrchestratorError> {
        let err = |e: csv::Error| OrchestratorError::io(path, e);
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(SERIES_HEADER).map_err(err)?;
        for (i, t) in self.timeline.iter().enumerate() {
            w.write_record([
                t.round.to_string(),
                t.phase.as_str().to_string(),
                format!("{:.6}", self.expansion_ratio_series[i]),
                format!("{:.6}", self.rolling_similarity_series[i]),
                format!("{:.6}", self.acceptance_rates[i]),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| OrchestratorError::io(path, e))
    }
}
