//! The synthesis loop: table selection, a generation or expansion round,
//! evaluation, pooling, then the phase decision for the next round.

mod checkpoint;
mod config;
mod report;

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use config::{BackendConfig, BackendKind, DatabaseConfig, ExecConfig, RunConfig, StopConfig};
pub use report::{RunReport, SERIES_HEADER};

use crate::agents::{
    critical_evaluate, expand, generate, manage_decide, seed_select, table_select, AgentError, BatchStats,
    CandidateBatch, DecisionReason, EvaluationReport, ManageInput, Phase, PhaseDecision, TableSelection, Verdict,
};
use crate::exec::{ExecutionTool, HarnessError, SqliteHarness};
use crate::llm::{FallbackEncoder, Gateway, TextEncoder, FALLBACK_DIM};
use crate::pool::{PoolError, SqlPool};
use crate::schema::{collect_hints_for, ContentHints, DatabaseSchema, SchemaError};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const DECISION_LOG: &str = "decisions.jsonl";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const REPORT_FILE: &str = "run_report.json";
pub const SERIES_FILE: &str = "run_series.csv";

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error("resume refused: {0}")]
    ResumeRefused(String),
    #[error("injected crash in round {round}")]
    Injected { round: u32 },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl OrchestratorError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        OrchestratorError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Target,
    Saturation,
    Budget,
}

/// What happened in one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub round: u32,
    /// Phase the round actually ran in.
    pub phase: Phase,
    /// Expansion was due but no seeds existed, so the round generated.
    #[serde(default)]
    pub forced_gen: bool,
    pub next_phase: Phase,
    pub reason: DecisionReason,
}

/// Run state after `round` completed rounds. Reports are kept without
/// their per-candidate verdicts, which go to the decision log instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulerState {
    /// Phase planned for the next round.
    pub phase: Phase,
    /// Number of completed rounds, which is also the next round's index.
    pub round: u32,
    pub consecutive_gen_rounds: u32,
    pub report_history: Vec<EvaluationReport>,
    pub expansion_ratio_series: Vec<f64>,
    pub rolling_similarity_series: Vec<f64>,
    pub timeline: Vec<TimelineEntry>,
    pub pool_size: usize,
    pub tokens_used: u64,
}

impl Default for SchedulerState {
    fn default() -> Self {
        SchedulerState {
            phase: Phase::Gen,
            round: 0,
            consecutive_gen_rounds: 0,
            report_history: Vec::new(),
            expansion_ratio_series: Vec::new(),
            rolling_similarity_series: Vec::new(),
            timeline: Vec::new(),
            pool_size: 0,
            tokens_used: 0,
        }
    }
}

impl SchedulerState {
    /// Number of phase changes between consecutive rounds.
    pub fn alternations(&self) -> usize {
        self.timeline.windows(2).filter(|w| w[0].phase != w[1].phase).count()
    }

    /// Mean of the last `window` rounds' mean neighbour similarity.
    fn rolling_similarity(&self, window: usize) -> f64 {
        let tail = &self.report_history[self.report_history.len().saturating_sub(window)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().map(|r| r.mean_max_neighbor_similarity).sum::<f64>() / tail.len() as f64
    }
}

/// The saturation trend: the last `v` rolling-similarity points never
/// decrease and end above where they started.
pub fn similarity_trend_up(series: &[f64], v: usize) -> bool {
    if v < 2 || series.len() < v {
        return false;
    }
    let tail = &series[series.len() - v..];
    tail.windows(2).all(|w| w[1] >= w[0]) && tail[v - 1] > tail[0]
}

/// Whether to stop before the next round. The target is checked even
/// before the first round; the other rules need at least one round.
pub fn should_stop(state: &SchedulerState, cfg: &RunConfig) -> Option<StopReason> {
    if state.pool_size >= cfg.target_query_count {
        return Some(StopReason::Target);
    }
    if state.round == 0 {
        return None;
    }
    let ratio = state.expansion_ratio_series.last().copied().unwrap_or(0.0);
    if ratio >= cfg.stop.dominance && similarity_trend_up(&state.rolling_similarity_series, cfg.stop.trend_rounds) {
        return Some(StopReason::Saturation);
    }
    let over_tokens = cfg.stop.max_tokens.is_some_and(|m| state.tokens_used >= m);
    if state.round >= cfg.stop.max_rounds || over_tokens {
        return Some(StopReason::Budget);
    }
    None
}

/// Test hooks.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunHooks {
    /// Fail with [`OrchestratorError::Injected`] after this round pooled its
    /// queries and before it was checkpointed.
    pub crash_at_round: Option<u32>,
}

#[derive(Serialize)]
struct DecisionLine<'a> {
    round: u32,
    phase: Phase,
    forced_gen: bool,
    selection: &'a TableSelection,
    seeds: &'a [i64],
    stats: BatchStats,
    report: &'a EvaluationReport,
    decision: &'a PhaseDecision,
    pool_size: usize,
    expansion_ratio: f64,
    rolling_similarity: f64,
}

pub struct Runner<'a> {
    pub cfg: &'a RunConfig,
    pub db: &'a DatabaseSchema,
    pub gateway: &'a Gateway,
    pub harness: &'a dyn ExecutionTool,
    pub encoder: &'a dyn TextEncoder,
    pub out_dir: PathBuf,
    pub hooks: RunHooks,
}

impl Runner<'_> {
    pub fn checkpoint_path(&self) -> PathBuf {
        self.out_dir.join(CHECKPOINT_FILE)
    }

    fn log_path(&self) -> PathBuf {
        self.out_dir.join(DECISION_LOG)
    }

    /// Starts a run on an empty pool.
    pub fn run(&self, pool: &mut SqlPool) -> Result<RunReport, OrchestratorError> {
        self.cfg.validate()?;
        if !pool.is_empty() {
            return Err(OrchestratorError::Config(format!("pool already holds {} queries; resume instead", pool.len())));
        }
        std::fs::create_dir_all(&self.out_dir).map_err(|e| OrchestratorError::io(&self.out_dir, e))?;
        if self.checkpoint_path().exists() {
            return Err(OrchestratorError::Config(format!(
                "{} exists; resume the run or remove it",
                self.checkpoint_path().display()
            )));
        }
        File::create(self.log_path()).map_err(|e| OrchestratorError::io(&self.log_path(), e))?;
        let state = SchedulerState::default();
        self.save(&state, pool)?;
        self.drive(state, pool)
    }

    /// Continues from the checkpoint in the output directory. Records of the
    /// interrupted round are dropped so that round replays from its start.
    pub fn resume(&self, pool: &mut SqlPool) -> Result<RunReport, OrchestratorError> {
        self.cfg.validate()?;
        let cp = Checkpoint::read(&self.checkpoint_path())?;
        if cp.config_digest != self.cfg.digest() || cp.run_id != self.cfg.run_id || cp.seed != self.cfg.seed {
            return Err(OrchestratorError::ResumeRefused("the configuration changed since the checkpoint".into()));
        }
        let dropped = pool.truncate_from_round(cp.state.round)?;
        if dropped > 0 {
            tracing::info!(round = cp.state.round, dropped, "discarded records of the interrupted round");
        }
        cp.verify_pool(pool)?;
        self.gateway.restore_counters(&cp.gateway_counters);
        self.trim_log(cp.state.round)?;
        self.drive(cp.state, pool)
    }

    /// Drops decision-log lines of rounds at or after `round`.
    fn trim_log(&self, round: u32) -> Result<(), OrchestratorError> {
        let path = self.log_path();
        let err = |e: std::io::Error| OrchestratorError::io(&path, e);
        let kept: Vec<String> = match File::open(&path) {
            Ok(f) => BufReader::new(f)
                .lines()
                .collect::<Result<Vec<_>, _>>()
                .map_err(err)?
                .into_iter()
                .filter(|l| {
                    serde_json::from_str::<serde_json::Value>(l)
                        .ok()
                        .and_then(|v| v.get("round").and_then(|r| r.as_u64()))
                        .is_some_and(|r| r < u64::from(round))
                })
                .collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(err(e)),
        };
        let mut f = File::create(&path).map_err(err)?;
        for l in kept {
            writeln!(f, "{l}").map_err(err)?;
        }
        Ok(())
    }

    fn save(&self, state: &SchedulerState, pool: &SqlPool) -> Result<(), OrchestratorError> {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            run_id: self.cfg.run_id.clone(),
            seed: self.cfg.seed,
            config_digest: self.cfg.digest(),
            state: state.clone(),
            gateway_counters: self.gateway.counters(),
            pool_path: pool.path().map(Path::to_path_buf),
            pool_len: pool.len(),
            pool_hash: pool.content_hash(),
        }
        .write_atomic(&self.checkpoint_path())
    }

    fn hints(&self) -> Result<BTreeMap<String, ContentHints>, OrchestratorError> {
        let path = self
            .db
            .data_path
            .as_deref()
            .ok_or_else(|| OrchestratorError::Config(format!("database {} has no data file", self.db.name)))?;
        let conn = Connection::open_with_flags(path, OpenFlags::SQLITE_OPEN_READ_ONLY)
            .map_err(|e| OrchestratorError::io(path, e))?;
        Ok(collect_hints_for(&conn, self.db, &self.db.table_names(), self.cfg.seed)?)
    }

    fn drive(&self, mut state: SchedulerState, pool: &mut SqlPool) -> Result<RunReport, OrchestratorError> {
        pool.set_retrieval_mode(self.cfg.retrieval);
        let hints = self.hints()?;
        let all_tables = self.db.table_names();
        let tokens_base = state.tokens_used;
        let gateway_start = self.gateway.total_tokens();
        let mut log = OpenOptions::new()
            .append(true)
            .create(true)
            .open(self.log_path())
            .map_err(|e| OrchestratorError::io(&self.log_path(), e))?;

        let stop = loop {
            if let Some(reason) = should_stop(&state, self.cfg) {
                break reason;
            }
            let round = state.round;
            let stats_before = pool.stats_per_table(&all_tables);
            let reasoner = self.cfg.backend.reasoner_table_selection.then_some(self.gateway);
            let selection = table_select(reasoner, self.db, &stats_before, self.cfg.tables_per_round)?;

            let mut phase = state.phase;
            let mut seeds = Vec::new();
            if phase == Phase::Exp {
                seeds = seed_select(pool, &selection.tables, self.cfg.seeds_per_expansion);
            }
            let forced_gen = phase == Phase::Exp && seeds.is_empty();
            if forced_gen {
                phase = Phase::Gen;
            }
            let batch = match phase {
                Phase::Gen => generate(self.gateway, self.db, &selection.tables, &hints, self.cfg.gen_batch),
                Phase::Exp => {
                    let records: Vec<_> = seeds.iter().filter_map(|id| pool.get(*id)).collect();
                    expand(self.gateway, self.db, &records, self.cfg.exp_batch)
                }
            };
            let batch = match batch {
                Ok(b) => b,
                Err(AgentError::EmptyExtraction(what)) => {
                    tracing::warn!(round, "no SQL in the {what} response; round yields nothing");
                    CandidateBatch::default()
                }
                Err(e) => return Err(e.into()),
            };
            let stats = batch.stats;
            let mut report =
                critical_evaluate(batch.candidates, phase, round, &self.cfg.critic, pool, self.harness, self.encoder)?;

            if self.hooks.crash_at_round == Some(round) {
                return Err(OrchestratorError::Injected { round });
            }

            state.consecutive_gen_rounds = if phase == Phase::Gen { state.consecutive_gen_rounds + 1 } else { 0 };
            let ratio = pool.expansion_ratio().ratio;
            state.pool_size = pool.len();
            state.expansion_ratio_series.push(ratio);

            let table_stats = pool
                .stats_per_table(&all_tables)
                .iter()
                .map(|(t, c)| format!("- {t}: {c} queries"))
                .collect::<Vec<_>>()
                .join("\n");
            let neighbors = neighbor_summary(&report);
            let input = ManageInput {
                phase,
                gen_streak: state.consecutive_gen_rounds,
                pool_size: pool.len(),
                expansion_ratio: ratio,
                table_stats: &table_stats,
                neighbors: &neighbors,
            };
            let decision =
                manage_decide(&input, &report, &self.cfg.schedule, self.cfg.manage_policy, Some(self.gateway));

            let verdicts = std::mem::take(&mut report.verdicts);
            state.report_history.push(report);
            let rolling = state.rolling_similarity(self.cfg.stop.rolling_window);
            state.rolling_similarity_series.push(rolling);
            let line = DecisionLine {
                round,
                phase,
                forced_gen,
                selection: &selection,
                seeds: &seeds,
                stats,
                report: state.report_history.last().expect("just pushed"),
                decision: &decision,
                pool_size: pool.len(),
                expansion_ratio: ratio,
                rolling_similarity: rolling,
            };
            let mut logged = serde_json::to_value(&line).expect("decision line serializes");
            logged["report"]["verdicts"] = serde_json::to_value(&verdicts).expect("verdicts serialize");
            writeln!(log, "{logged}").map_err(|e| OrchestratorError::io(&self.log_path(), e))?;

            state.timeline.push(TimelineEntry {
                round,
                phase,
                forced_gen,
                next_phase: decision.next_phase,
                reason: if forced_gen { DecisionReason::EmptySeeds } else { decision.reason },
            });
            state.phase = decision.next_phase;
            state.round += 1;
            state.tokens_used = tokens_base + (self.gateway.total_tokens() - gateway_start);
            tracing::info!(
                round,
                phase = phase.as_str(),
                accepted = state.report_history.last().map_or(0, |r| r.accepted),
                pool = state.pool_size,
                next = state.phase.as_str(),
                "round complete"
            );
            self.save(&state, pool)?;
        };
        log.flush().map_err(|e| OrchestratorError::io(&self.log_path(), e))?;

        let report = RunReport::build(self.cfg, &state, stop, pool, self.gateway);
        report.write_json(&self.out_dir.join(REPORT_FILE))?;
        report.write_series_csv(&self.out_dir.join(SERIES_FILE))?;
        Ok(report)
    }
}

/// A few accepted queries with their closest-neighbour similarity.
fn neighbor_summary(report: &EvaluationReport) -> String {
    let lines: Vec<String> = report
        .verdicts
        .iter()
        .filter(|v| matches!(v.verdict, Verdict::Accepted { .. }))
        .take(3)
        .map(|v| {
            let sql: String = v.sql.chars().take(160).collect();
            match v.max_neighbor_sim {
                Some(s) => format!("- {s:.3}: {sql}"),
                None => format!("- none: {sql}"),
            }
        })
        .collect();
    if lines.is_empty() {
        "(none accepted)".into()
    } else {
        lines.join("\n")
    }
}

/// Opens everything a run needs from a configuration and starts or resumes
/// it. The gateway transcript goes to the output directory.
pub fn synthesize(
    cfg: &RunConfig,
    db: &DatabaseSchema,
    pool_path: &Path,
    out_dir: &Path,
    resume: bool,
) -> Result<RunReport, OrchestratorError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| OrchestratorError::io(out_dir, e))?;
    let data = db
        .data_path
        .as_deref()
        .ok_or_else(|| OrchestratorError::Config(format!("database {} has no data file", db.name)))?;
    let harness = SqliteHarness::new(data, cfg.exec_timeout(), cfg.exec.row_cap)?;
    let gateway = cfg
        .build_gateway()?
        .with_transcript(&out_dir.join(TRANSCRIPT_FILE))
        .map_err(|e| OrchestratorError::io(&out_dir.join(TRANSCRIPT_FILE), e))?;
    let encoder = FallbackEncoder;
    let mut pool = SqlPool::open(pool_path, FALLBACK_DIM)?;
    let runner = Runner {
        cfg,
        db,
        gateway: &gateway,
        harness: &harness,
        encoder: &encoder,
        out_dir: out_dir.to_path_buf(),
        hooks: RunHooks::default(),
    };
    if resume {
        runner.resume(&mut pool)
    } else {
        runner.run(&mut pool)
    }
}
