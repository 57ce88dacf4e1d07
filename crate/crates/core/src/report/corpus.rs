//! Query corpora for reporting: a pool, SQL files, or jsonl exports.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::analysis::{analyze, AnalyzedQuery};
use crate::exec::ExecutionTool;
use crate::llm::split_statements;
use crate::pool::SqlPool;

#[derive(Clone, Debug)]
pub struct CorpusItem {
    /// `file:index` for files, `pool:id` for pool records.
    pub source: String,
    pub analyzed: AnalyzedQuery,
    /// Execution outcome when known: `(executable, empty_result)`.
    pub outcome: Option<(bool, bool)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unparseable {
    pub source: String,
    pub error: String,
}

#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub items: Vec<CorpusItem>,
    pub unparseable: Vec<Unparseable>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn push(&mut self, source: String, sql: &str) {
        match analyze(sql) {
            Ok(analyzed) => self.items.push(CorpusItem { source, analyzed, outcome: None }),
            Err(e) => self.unparseable.push(Unparseable { source, error: e.to_string() }),
        }
    }

    /// Semicolon-separated SQL text. Statements that do not parse as
    /// queries are counted, not fatal.
    pub fn from_sql_text(text: &str, name: &str) -> Self {
        let mut c = Corpus::default();
        c.add_sql_text(text, name);
        c
    }

    fn add_sql_text(&mut self, text: &str, name: &str) {
        for (i, stmt) in split_statements(text).iter().enumerate() {
            self.push(format!("{name}:{}", i + 1), stmt);
        }
    }

    /// One query per line, read from the `sql` field.
    fn add_jsonl(&mut self, text: &str, name: &str) -> Result<(), ReportError> {
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let source = format!("{name}:{}", i + 1);
            let v: serde_json::Value =
                serde_json::from_str(line).map_err(|e| ReportError::Corpus(format!("{source}: {e}")))?;
            match v.get("sql").and_then(|s| s.as_str()) {
                Some(sql) => self.push(source, sql),
                None => self.unparseable.push(Unparseable { source, error: "no sql field".into() }),
            }
        }
        Ok(())
    }

    /// Loads a `.sql`/`.jsonl` file, or every such file below a directory
    /// in path order.
    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let mut files = Vec::new();
        if path.is_dir() {
            collect_files(path, &mut files)?;
        } else if path.exists() {
            files.push(path.to_path_buf());
        } else {
            return Err(ReportError::Corpus(format!("{} does not exist", path.display())));
        }
        let mut c = Corpus::default();
        for f in files {
            let text = std::fs::read_to_string(&f).map_err(|e| ReportError::Io(format!("{}: {e}", f.display())))?;
            let name = f.display().to_string();
            if f.extension().is_some_and(|e| e == "jsonl") {
                c.add_jsonl(&text, &name)?;
            } else {
                c.add_sql_text(&text, &name);
            }
        }
        Ok(c)
    }

    /// Pool records keep their stored execution outcome.
    pub fn from_pool(pool: &SqlPool) -> Self {
        let mut c = Corpus::default();
        for r in pool.records() {
            let source = format!("pool:{}", r.id);
            match analyze(&r.sql) {
                Ok(analyzed) => {
                    c.items.push(CorpusItem { source, analyzed, outcome: Some((r.executable, r.empty_result)) })
                }
                Err(e) => c.unparseable.push(Unparseable { source, error: e.to_string() }),
            }
        }
        c
    }

    /// Runs every query through `harness` and records the outcome. Harness
    /// failures count as not executable.
    pub fn execute(&mut self, harness: &dyn ExecutionTool, parallelism: usize) {
        let sqls: Vec<String> = self.items.iter().map(|i| i.analyzed.sql.clone()).collect();
        for (item, v) in self.items.iter_mut().zip(harness.check_batch(&sqls, parallelism)) {
            item.outcome = Some(match v {
                Ok(v) => (v.executable, v.empty_result),
                Err(_) => (false, false),
            });
        }
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), ReportError> {
    let io = |e: std::io::Error| ReportError::Io(format!("{}: {e}", dir.display()));
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir).map_err(io)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>().map_err(io)?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "sql" || e == "jsonl") {
            out.push(p);
        }
    }
    Ok(())
}
