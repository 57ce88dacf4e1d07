//! The six agents. Each is a thin decision layer over the gateway, the
//! pool, the similarity metrics and the execution harness.

mod critic;
mod manage;
mod table_select;
mod teams;

pub use critic::{critical_evaluate, CriticConfig, EvaluationReport, NeighborRef, QueryVerdict, Verdict};
pub use manage::{manage_decide, parse_advice, DecisionReason, ManageInput, ManagePolicy, PhaseDecision, ScheduleThresholds};
pub use table_select::{fallback_ranking, parse_table_answer, table_select, TableSelection};
pub use teams::{expand, generate, seed_select, BatchStats, CandidateBatch};

use crate::exec::HarnessError;
use crate::llm::{EncodeError, GatewayError};
use crate::pool::{Origin, PoolError};
use crate::schema::SchemaError;

/// Synthesis phase; identical to the origin tag its accepted queries get.
pub type Phase = Origin;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("table selection failed: {0}")]
    Selection(String),
    #[error("no SQL could be extracted from the {0} response")]
    EmptyExtraction(&'static str),
    #[error("invalid agent input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}
