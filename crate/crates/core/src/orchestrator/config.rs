use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::agents::{CriticConfig, ManagePolicy, ScheduleThresholds};
use crate::llm::{CompletionBackend, Gateway, HttpBackend, HttpConfig, ModelRole, RetryPolicy, ScriptedBackend, ScriptedFixture};
use crate::pool::RetrievalMode;
use crate::schema::{load_sqlite_database, DatabaseSchema, EnumDetection};
use crate::toy::{ToyMode, ToyModel};

/// When to give up on the run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopConfig {
    /// Expansion share at or above which expansion counts as dominant.
    pub dominance: f64,
    /// Rounds over which the rolling similarity must not decrease.
    pub trend_rounds: usize,
    /// Rounds averaged into one rolling-similarity point.
    pub rolling_window: usize,
    pub max_rounds: u32,
    /// Gateway token budget; unlimited when absent.
    pub max_tokens: Option<u64>,
}

impl Default for StopConfig {
    fn default() -> Self {
        StopConfig { dominance: 0.8, trend_rounds: 5, rolling_window: 3, max_rounds: 500, max_tokens: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecConfig {
    pub timeout_ms: u64,
    pub row_cap: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig { timeout_ms: 5_000, row_cap: 1_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// The built-in deterministic model; needs no network.
    #[default]
    Toy,
    /// OpenAI-compatible chat completions.
    Http,
    /// Recorded responses from a fixture file.
    Scripted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub toy_mode: ToyMode,
    /// Fixture file for the scripted backend.
    pub fixture: Option<PathBuf>,
    pub generator_model: String,
    pub expander_model: String,
    pub reasoner_model: String,
    pub timeout_secs: u64,
    pub concurrency: usize,
    pub retry: RetryPolicy,
    /// Ask the reasoner for table choices. Off means the structural ranking alone.
    pub reasoner_table_selection: bool,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Toy,
            toy_mode: ToyMode::Diverse,
            fixture: None,
            generator_model: "gpt-4o".into(),
            expander_model: "gpt-4o-mini".into(),
            reasoner_model: "gpt-4o".into(),
            timeout_secs: 120,
            concurrency: 4,
            retry: RetryPolicy::default(),
            reasoner_table_selection: true,
        }
    }
}

/// Where the workload runs. Relative paths are taken from the directory of
/// the configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatabaseConfig {
    /// SQLite file the queries execute against.
    pub path: Option<PathBuf>,
    /// DDL declaring keys and references; the file is introspected when absent.
    pub ddl: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: String,
    pub seed: u64,
    pub target_query_count: usize,
    /// Candidates requested per generation round.
    pub gen_batch: usize,
    /// Candidates requested per expansion round.
    pub exp_batch: usize,
    pub tables_per_round: usize,
    pub seeds_per_expansion: usize,
    pub manage_policy: ManagePolicy,
    pub retrieval: RetrievalMode,
    pub critic: CriticConfig,
    pub schedule: ScheduleThresholds,
    pub stop: StopConfig,
    pub exec: ExecConfig,
    pub database: DatabaseConfig,
    pub backend: BackendConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run_id: "run".into(),
            seed: 42,
            target_query_count: 1_000,
            gen_batch: 20,
            exp_batch: 50,
            tables_per_round: 3,
            seeds_per_expansion: 5,
            manage_policy: ManagePolicy::Rule,
            retrieval: RetrievalMode::Exact,
            critic: CriticConfig::default(),
            schedule: ScheduleThresholds::default(),
            stop: StopConfig::default(),
            exec: ExecConfig::default(),
            database: DatabaseConfig::default(),
            backend: BackendConfig::default(),
        }
    }
}

fn unit_open(name: &str, v: f64) -> Result<(), OrchestratorError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(OrchestratorError::Config(format!("{name} must lie strictly between 0 and 1, got {v}")))
    }
}

fn positive(name: &str, v: usize) -> Result<(), OrchestratorError> {
    if v >= 1 {
        Ok(())
    } else {
        Err(OrchestratorError::Config(format!("{name} must be at least 1")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, OrchestratorError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, OrchestratorError> {
        let text = std::fs::read_to_string(path).map_err(|e| OrchestratorError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    /// Makes the file paths in the configuration absolute against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.database.path, &mut self.database.ddl, &mut self.backend.fixture].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    /// The configured database with its schema.
    pub fn load_database(&self) -> Result<DatabaseSchema, OrchestratorError> {
        let path = self.database.path.as_deref().ok_or_else(|| OrchestratorError::Config("database.path is not set".into()))?;
        Ok(load_sqlite_database(path, self.database.ddl.as_deref(), &EnumDetection::default())?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    /// Digest of every setting; a checkpoint only resumes under the same one.
    pub fn digest(&self) -> String {
        crate::util::sha256_hex(&self.to_toml())
    }

    /// A target of zero is allowed and stops the run before the first round.
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        unit_open("critic.theta_sim", self.critic.theta_sim)?;
        unit_open("schedule.theta_red", self.schedule.theta_red)?;
        unit_open("schedule.theta_exec", self.schedule.theta_exec)?;
        unit_open("stop.dominance", self.stop.dominance)?;
        positive("gen_batch", self.gen_batch)?;
        positive("exp_batch", self.exp_batch)?;
        positive("tables_per_round", self.tables_per_round)?;
        positive("seeds_per_expansion", self.seeds_per_expansion)?;
        positive("critic.k", self.critic.k)?;
        positive("critic.parallelism", self.critic.parallelism)?;
        positive("stop.trend_rounds", self.stop.trend_rounds)?;
        positive("stop.rolling_window", self.stop.rolling_window)?;
        positive("exec.row_cap", self.exec.row_cap)?;
        positive("backend.concurrency", self.backend.concurrency)?;
        if self.exec.timeout_ms == 0 {
            return Err(OrchestratorError::Config("exec.timeout_ms must be positive".into()));
        }
        if self.schedule.gen_cycles == 0 {
            return Err(OrchestratorError::Config("schedule.gen_cycles must be at least 1".into()));
        }
        if let RetrievalMode::Ivf { nlist, nprobe } = self.retrieval {
            if nlist == 0 || nprobe == 0 || nprobe > nlist {
                return Err(OrchestratorError::Config(format!("bad ivf settings nlist={nlist} nprobe={nprobe}")));
            }
        }
        if self.backend.kind == BackendKind::Scripted && self.backend.fixture.is_none() {
            return Err(OrchestratorError::Config("the scripted backend needs backend.fixture".into()));
        }
        self.critic.weights.validate().map_err(|e| OrchestratorError::Config(e.to_string()))
    }

    pub fn exec_timeout(&self) -> Duration {
        Duration::from_millis(self.exec.timeout_ms)
    }

    /// A gateway with a backend for every role, as the backend section says.
    /// API keys come from the environment only.
    pub fn build_gateway(&self) -> Result<Gateway, OrchestratorError> {
        let b = &self.backend;
        let mut gw = Gateway::new(self.run_id.clone(), b.retry, b.concurrency);
        let scripted: Option<Arc<dyn CompletionBackend>> = match (&b.kind, &b.fixture) {
            (BackendKind::Scripted, Some(path)) => {
                let fixture = ScriptedFixture::load(path).map_err(|e| OrchestratorError::Config(e.to_string()))?;
                Some(Arc::new(ScriptedBackend::new(fixture)))
            }
            _ => None,
        };
        for role in ModelRole::ALL {
            let backend: Arc<dyn CompletionBackend> = match b.kind {
                BackendKind::Toy => Arc::new(ToyModel::new(self.seed, b.toy_mode)),
                BackendKind::Scripted => scripted.clone().expect("validated"),
                BackendKind::Http => {
                    let model = match role {
                        ModelRole::Generator => &b.generator_model,
                        ModelRole::Expander => &b.expander_model,
                        ModelRole::Reasoner => &b.reasoner_model,
                    };
                    let cfg = HttpConfig::from_env(role, model, b.timeout_secs);
                    Arc::new(HttpBackend::new(cfg).map_err(|e| OrchestratorError::Config(e.to_string()))?)
                }
            };
            gw = gw.with_backend(role, backend);
        }
        Ok(gw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let partial = RunConfig::from_toml("target_query_count = 5\n[critic]\ntheta_sim = 0.8\n").unwrap();
        assert_eq!((partial.target_query_count, partial.critic.theta_sim, partial.critic.k), (5, 0.8, 10));
    }

    #[test]
    fn bad_settings_are_rejected() {
        assert!(RunConfig::from_toml("unknown_key = 1").is_err());
        assert!(RunConfig::from_toml("[critic]\ntheta_sim = 1.0").is_err());
        assert!(RunConfig::from_toml("gen_batch = 0").is_err());
        assert!(RunConfig::from_toml("[critic.weights]\nalpha = 0.5\nbeta = 0.3\ngamma = 0.1").is_err());
        assert!(RunConfig::from_toml("[backend]\nkind = \"scripted\"").is_err());
        assert!(RunConfig::from_toml("retrieval = { mode = \"ivf\", nlist = 4, nprobe = 8 }").is_err());
    }
}
