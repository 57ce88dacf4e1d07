//! Execution tool: runs candidate queries read-only against the target
//! database with a deadline and a row cap.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rusqlite::{Connection, ErrorCode, OpenFlags};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);
pub const DEFAULT_ROW_CAP: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorClass {
    None,
    Syntax,
    MissingRelation,
    MissingColumn,
    TypeMismatch,
    Timeout,
    Other,
}

impl ErrorClass {
    /// Classifies an engine error message.
    pub fn from_message(msg: &str) -> Self {
        let m = msg.to_ascii_lowercase();
        if m.contains("interrupted") {
            ErrorClass::Timeout
        } else if m.contains("no such table") || m.contains("no such view") {
            ErrorClass::MissingRelation
        } else if m.contains("no such column") {
            ErrorClass::MissingColumn
        } else if m.contains("syntax error") || m.contains("incomplete input") || m.contains("unrecognized token") {
            ErrorClass::Syntax
        } else if m.contains("mismatch") {
            ErrorClass::TypeMismatch
        } else {
            ErrorClass::Other
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExecVerdict {
    pub executable: bool,
    pub error_class: ErrorClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub empty_result: bool,
    /// Rows fetched, at most the row cap.
    pub row_count: usize,
    /// The row cap was reached; the query still counts as executable.
    pub capped: bool,
    pub elapsed: Duration,
}

/// Equality ignores `elapsed`.
impl PartialEq for ExecVerdict {
    fn eq(&self, o: &Self) -> bool {
        self.executable == o.executable
            && self.error_class == o.error_class
            && self.message == o.message
            && self.empty_result == o.empty_result
            && self.row_count == o.row_count
            && self.capped == o.capped
    }
}

impl ExecVerdict {
    fn failed(class: ErrorClass, message: String, elapsed: Duration) -> Self {
        ExecVerdict {
            executable: false,
            error_class: class,
            message: Some(message),
            empty_result: false,
            row_count: 0,
            capped: false,
            elapsed,
        }
    }
}

/// Failure of the harness itself, as opposed to a failing query.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("cannot connect to {path}: {message}")]
    Connection { path: String, message: String },
    #[error("invalid harness setting: {0}")]
    Config(String),
}

/// Anything that can judge executability; SQLite is the built-in engine.
pub trait ExecutionTool: Sync {
    fn check(&self, sql: &str) -> Result<ExecVerdict, HarnessError>;

    /// Checks in input order with at most `parallelism` workers. One
    /// failing query never affects the others.
    fn check_batch(&self, queries: &[String], parallelism: usize) -> Vec<Result<ExecVerdict, HarnessError>> {
        let workers = parallelism.max(1).min(queries.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<ExecVerdict, HarnessError>>>> =
            queries.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= queries.len() {
                        break;
                    }
                    *slots[i].lock().expect("slot lock poisoned") = Some(self.check(&queries[i]));
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().expect("slot lock poisoned").expect("every slot filled"))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SqliteHarness {
    path: PathBuf,
    timeout: Duration,
    row_cap: usize,
}

impl SqliteHarness {
    /// Verifies the database opens read-only before returning.
    pub fn new(path: &Path, timeout: Duration, row_cap: usize) -> Result<Self, HarnessError> {
        if timeout.is_zero() {
            return Err(HarnessError::Config("timeout must be positive".into()));
        }
        if row_cap == 0 {
            return Err(HarnessError::Config("row cap must be positive".into()));
        }
        let h = SqliteHarness { path: path.to_path_buf(), timeout, row_cap };
        let conn = h.connect()?;
        conn.query_row("SELECT COUNT(*) FROM sqlite_master", [], |r| r.get::<_, i64>(0))
            .map_err(|e| h.connection_error(e))?;
        Ok(h)
    }

    pub fn with_defaults(path: &Path) -> Result<Self, HarnessError> {
        Self::new(path, DEFAULT_TIMEOUT, DEFAULT_ROW_CAP)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn connection_error(&self, e: impl std::fmt::Display) -> HarnessError {
        HarnessError::Connection { path: self.path.display().to_string(), message: e.to_string() }
    }

    fn connect(&self) -> Result<Connection, HarnessError> {
        let flags = OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX | OpenFlags::SQLITE_OPEN_URI;
        Connection::open_with_flags(&self.path, flags).map_err(|e| self.connection_error(e))
    }
}

fn is_connection_failure(e: &rusqlite::Error) -> bool {
    matches!(
        e.sqlite_error_code(),
        Some(ErrorCode::CannotOpen | ErrorCode::NotADatabase | ErrorCode::DatabaseCorrupt | ErrorCode::SystemIoFailure)
    )
}

impl ExecutionTool for SqliteHarness {
    fn check(&self, sql: &str) -> Result<ExecVerdict, HarnessError> {
        let conn = self.connect()?;
        let start = Instant::now();
        let deadline = start + self.timeout;
        conn.progress_handler(1_000, Some(move || Instant::now() >= deadline))
            .map_err(|e| self.connection_error(e))?;

        let sql = sql.trim().trim_end_matches(';').trim();
        let mut stmt = match conn.prepare(sql) {
            Ok(s) => s,
            Err(e) if is_connection_failure(&e) => return Err(self.connection_error(e)),
            Err(e) => {
                let msg = e.to_string();
                return Ok(ExecVerdict::failed(ErrorClass::from_message(&msg), msg, start.elapsed()));
            }
        };
        if !stmt.readonly() {
            return Ok(ExecVerdict::failed(
                ErrorClass::Other,
                "write statement rejected".into(),
                start.elapsed(),
            ));
        }
        let mut rows = match stmt.query([]) {
            Ok(r) => r,
            Err(e) => {
                let msg = e.to_string();
                return Ok(ExecVerdict::failed(ErrorClass::from_message(&msg), msg, start.elapsed()));
            }
        };
        let mut count = 0;
        loop {
            if count == self.row_cap {
                break;
            }
            match rows.next() {
                Ok(Some(_)) => count += 1,
                Ok(None) => break,
                Err(e) if is_connection_failure(&e) => return Err(self.connection_error(e)),
                Err(e) => {
                    let msg = e.to_string();
                    return Ok(ExecVerdict::failed(ErrorClass::from_message(&msg), msg, start.elapsed()));
                }
            }
        }
        Ok(ExecVerdict {
            executable: true,
            error_class: ErrorClass::None,
            message: None,
            empty_result: count == 0,
            row_count: count,
            capped: count == self.row_cap,
            elapsed: start.elapsed(),
        })
    }
}
