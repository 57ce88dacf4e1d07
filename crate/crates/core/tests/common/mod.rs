#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use sqlforge::exec::SqliteHarness;
use sqlforge::llm::{
    BackendError, Completion, CompletionBackend, CompletionRequest, FallbackEncoder, Gateway, ModelRole, ScriptedFixture,
};
use sqlforge::orchestrator::{BackendKind, RunConfig, RunHooks, RunReport, Runner};
use sqlforge::pool::SqlPool;
use sqlforge::schema::DatabaseSchema;
use sqlforge::toy::{build_toy_database, ToyMode, ToyModel};

pub const DIM: usize = sqlforge::llm::FALLBACK_DIM;

/// Wraps the toy model and remembers every answer by role and index.
pub struct Recorder {
    inner: ToyModel,
    seen: Arc<Mutex<ScriptedFixture>>,
}

impl CompletionBackend for Recorder {
    fn complete(&self, req: &CompletionRequest, seq: u64) -> Result<Completion, BackendError> {
        let c = self.inner.complete(req, seq)?;
        self.seen.lock().unwrap().push_sequence(req.role, seq, c.text.clone());
        Ok(c)
    }

    fn name(&self) -> &str {
        "recorder"
    }
}

pub fn toy_db(dir: &Path) -> DatabaseSchema {
    build_toy_database(&dir.join("toy.db"), 1).unwrap()
}

/// Runs the toy model once and saves its answers as a replay fixture.
pub fn record_fixture(cfg: &RunConfig, mode: ToyMode, db: &DatabaseSchema, dir: &Path) -> PathBuf {
    let seen = Arc::new(Mutex::new(ScriptedFixture::default()));
    let mut gw = Gateway::new(cfg.run_id.clone(), cfg.backend.retry, 1);
    for role in ModelRole::ALL {
        gw = gw.with_backend(role, Arc::new(Recorder { inner: ToyModel::new(cfg.seed, mode), seen: seen.clone() }));
    }
    let out = dir.join("recording");
    let mut pool = pool_in(&out);
    run_with(cfg, db, &gw, &mut pool, &out, RunHooks::default()).unwrap();
    let path = dir.join("fixture.json");
    let fixture = seen.lock().unwrap().clone();
    std::fs::write(&path, serde_json::to_string(&fixture.entries).unwrap()).unwrap();
    path
}

pub fn scripted(cfg: &RunConfig, fixture: &Path) -> RunConfig {
    let mut cfg = cfg.clone();
    cfg.backend.kind = BackendKind::Scripted;
    cfg.backend.fixture = Some(fixture.to_path_buf());
    cfg
}

pub fn run_with(
    cfg: &RunConfig,
    db: &DatabaseSchema,
    gw: &Gateway,
    pool: &mut SqlPool,
    out: &Path,
    hooks: RunHooks,
) -> Result<RunReport, sqlforge::orchestrator::OrchestratorError> {
    let harness = SqliteHarness::new(db.data_path.as_deref().unwrap(), cfg.exec_timeout(), cfg.exec.row_cap).unwrap();
    let runner = Runner { cfg, db, gateway: gw, harness: &harness, encoder: &FallbackEncoder, out_dir: out.to_path_buf(), hooks };
    runner.run(pool)
}

pub fn resume_with(
    cfg: &RunConfig,
    db: &DatabaseSchema,
    gw: &Gateway,
    pool: &mut SqlPool,
    out: &Path,
) -> Result<RunReport, sqlforge::orchestrator::OrchestratorError> {
    let harness = SqliteHarness::new(db.data_path.as_deref().unwrap(), cfg.exec_timeout(), cfg.exec.row_cap).unwrap();
    let runner =
        Runner { cfg, db, gateway: gw, harness: &harness, encoder: &FallbackEncoder, out_dir: out.to_path_buf(), hooks: RunHooks::default() };
    runner.resume(pool)
}

/// Opens `dir/pool.db`, creating the directory first.
pub fn pool_in(dir: &Path) -> SqlPool {
    std::fs::create_dir_all(dir).unwrap();
    SqlPool::open(&dir.join("pool.db"), DIM).unwrap()
}
