use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NewQuery, Origin, PoolError, SqlPool, SqlQueryRecord};
use crate::analysis::analyze;

pub const CSV_HEADER: [&str; 11] = [
    "id",
    "sql",
    "tables",
    "origin",
    "round",
    "joins",
    "predicates",
    "nesting",
    "aggregates",
    "tokens",
    "empty_result",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Jsonl,
    Csv,
    Sql,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(ExportFormat::Jsonl),
            "csv" => Ok(ExportFormat::Csv),
            "sql" | "sql-file" => Ok(ExportFormat::Sql),
            other => Err(format!("unknown export format {other}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonlFeatures {
    pub joins: usize,
    pub predicates: usize,
    pub nesting: usize,
    pub aggregates: usize,
    pub tokens: usize,
}

/// One line of the jsonl export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsonlRecord {
    pub id: i64,
    pub sql: String,
    pub tables: Vec<String>,
    pub origin: Origin,
    pub round: u32,
    pub features: JsonlFeatures,
    pub empty_result: bool,
}

impl From<&SqlQueryRecord> for JsonlRecord {
    fn from(r: &SqlQueryRecord) -> Self {
        let f = &r.features;
        JsonlRecord {
            id: r.id,
            sql: r.sql.clone(),
            tables: r.tables.iter().cloned().collect(),
            origin: r.origin,
            round: r.round,
            features: JsonlFeatures {
                joins: f.join_count,
                predicates: f.predicate_count,
                nesting: f.nesting_depth,
                aggregates: f.aggregate_count,
                tokens: f.token_length,
            },
            empty_result: r.empty_result,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PoolError {
    PoolError::Io { path: path.display().to_string(), message: e.to_string() }
}

impl SqlPool {
    /// Writes every record to `dest` and returns the number of files written.
    pub fn export(&self, format: ExportFormat, dest: &Path) -> Result<usize, PoolError> {
        let file = File::create(dest).map_err(|e| io_err(dest, e))?;
        let mut out = BufWriter::new(file);
        match format {
            ExportFormat::Jsonl => self.write_jsonl(&mut out).map_err(|e| io_err(dest, e))?,
            ExportFormat::Csv => {
                let mut w = csv::Writer::from_writer(&mut out);
                w.write_record(CSV_HEADER).map_err(|e| io_err(dest, e))?;
                for r in self.records() {
                    let j = JsonlRecord::from(r);
                    w.write_record([
                        j.id.to_string(),
                        j.sql,
                        j.tables.join(";"),
                        j.origin.as_str().to_string(),
                        j.round.to_string(),
                        j.features.joins.to_string(),
                        j.features.predicates.to_string(),
                        j.features.nesting.to_string(),
                        j.features.aggregates.to_string(),
                        j.features.tokens.to_string(),
                        j.empty_result.to_string(),
                    ])
                    .map_err(|e| io_err(dest, e))?;
                }
                w.flush().map_err(|e| io_err(dest, e))?;
            }
            ExportFormat::Sql => {
                for r in self.records() {
                    let tables: Vec<&str> = r.tables.iter().map(String::as_str).collect();
                    writeln!(
                        out,
                        "-- id={} origin={} round={} tables={}\n{};\n",
                        r.id,
                        r.origin.as_str(),
                        r.round,
                        tables.join(","),
                        r.sql
                    )
                    .map_err(|e| io_err(dest, e))?;
                }
            }
        }
        out.flush().map_err(|e| io_err(dest, e))?;
        Ok(1)
    }

    /// The jsonl export as one string.
    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    fn write_jsonl<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for r in self.records() {
            serde_json::to_writer(&mut *out, &JsonlRecord::from(r))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Loads a jsonl export, keeping ids, origins and rounds. Embeddings are
    /// recomputed with `encode`. Returns the number of records imported.
    pub fn import_jsonl(&mut self, src: &Path, encode: &dyn Fn(&str) -> Vec<f64>) -> Result<usize, PoolError> {
        let file = File::open(src).map_err(|e| io_err(src, e))?;
        let mut count = 0;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| io_err(src, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let j: JsonlRecord =
                serde_json::from_str(&line).map_err(|e| io_err(src, format!("line {}: {e}", lineno + 1)))?;
            let analyzed = analyze(&j.sql).map_err(|e| PoolError::Corrupt { id: j.id, message: e.to_string() })?;
            let q = NewQuery {
                embedding: encode(&analyzed.sql),
                analyzed,
                origin: j.origin,
                round: j.round,
                executable: true,
                empty_result: j.empty_result,
                max_neighbor_sim: None,
            };
            self.insert_with_id(j.id, q)?;
            count += 1;
        }
        Ok(count)
    }

    fn insert_with_id(&mut self, id: i64, q: NewQuery) -> Result<(), PoolError> {
        self.check(&q)?;
        if self.get(id).is_some() || self.entries.last().is_some_and(|e| e.record.id >= id) {
            return Err(PoolError::Storage(format!("id {id} is not past the current maximum")));
        }
        let record = self.record_for(id, &q);
        {
            let mut conn = self.conn.lock().expect("pool connection poisoned");
            let tx = conn.transaction()?;
            self.write_one(&tx, &record, &q.embedding)?;
            tx.commit()?;
        }
        self.push_entry(record, &q.analyzed, q.embedding);
        Ok(())
    }
}
