use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{OrchestratorError, SchedulerState};
use crate::llm::ModelRole;
use crate::pool::SqlPool;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to continue a run after the last completed round.
/// The toy and scripted backends derive their answers from the per-role
/// sequence counters, so those counters are the whole model-side RNG state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub run_id: String,
    pub seed: u64,
    pub config_digest: String,
    pub state: SchedulerState,
    pub gateway_counters: BTreeMap<ModelRole, u64>,
    pub pool_path: Option<PathBuf>,
    pub pool_len: usize,
    pub pool_hash: String,
}

impl Checkpoint {
    /// Writes next to `path` and renames over it, so a crash leaves either
    /// the old or the new checkpoint.
    pub fn write_atomic(&self, path: &Path) -> Result<(), OrchestratorError> {
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(self).expect("checkpoint always serializes");
        let written = (|| {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_all()?;
            std::fs::rename(&tmp, path)
        })();
        written.map_err(|e| OrchestratorError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, OrchestratorError> {
        let text = std::fs::read_to_string(path).map_err(|e| OrchestratorError::io(path, e))?;
        let cp: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| OrchestratorError::Checkpoint(format!("{}: {e}", path.display())))?;
        cp.validate()?;
        Ok(cp)
    }

    fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: String| Err(OrchestratorError::Checkpoint(m));
        if self.version != CHECKPOINT_VERSION {
            return bad(format!("unsupported checkpoint version {}", self.version));
        }
        let s = &self.state;
        let n = s.round as usize;
        if s.report_history.len() != n
            || s.expansion_ratio_series.len() != n
            || s.rolling_similarity_series.len() != n
            || s.timeline.len() != n
        {
            return bad(format!("series lengths disagree with round count {n}"));
        }
        if s.report_history.iter().enumerate().any(|(i, r)| r.round as usize != i) {
            return bad("round numbers in the history are not consecutive".into());
        }
        if self.pool_hash.len() != 64 || !self.pool_hash.bytes().all(|b| b.is_ascii_hexdigit()) {
            return bad("pool hash is not a SHA-256 digest".into());
        }
        Ok(())
    }

    /// Refuses a pool whose content differs from what was checkpointed.
    /// Call after dropping the records of the interrupted round.
    pub fn verify_pool(&self, pool: &SqlPool) -> Result<(), OrchestratorError> {
        let hash = pool.content_hash();
        if hash != self.pool_hash || pool.len() != self.pool_len {
            return Err(OrchestratorError::ResumeRefused(format!(
                "pool holds {} records with hash {hash}, checkpoint expects {} with hash {}",
                pool.len(),
                self.pool_len,
                self.pool_hash
            )));
        }
        Ok(())
    }
}
