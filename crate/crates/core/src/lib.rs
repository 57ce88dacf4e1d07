//! Schema-aware SQL workload synthesis.

pub mod agents;
pub mod analysis;
pub mod exec;
pub mod llm;
pub mod orchestrator;
pub mod pool;
pub mod report;
pub mod schema;
pub mod similarity;
pub mod toy;
pub mod util;
