//! Database schemas: DDL and live ingestion, complexity profiles, content
//! hints and prompt rendering.

mod hints;
mod ingest;
mod profile;
mod render;

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use hints::{collect_content_hints, collect_hints_for, ColumnHint, ContentHints, HintValue, MAX_HINT_VALUES};
pub use ingest::{ingest_benchmark_dir, ingest_ddl, introspect, load_sqlite_database, refine_enum_classes, EnumDetection};
pub use profile::{drt, profile_all, profile_table, write_profiles_csv, TableProfile};
pub use render::render_schema_block;

/// Built-in TPC-DS DDL (24 tables with surrogate-key foreign keys).
pub const TPCDS_DDL: &str = include_str!("../../assets/tpcds.sql");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemaError {
    #[error("DDL parse error at line {line}, column {column}: {message}")]
    Parse { message: String, line: u64, column: u64 },
    #[error("duplicate table {table} in database {database}")]
    DuplicateTable { database: String, table: String },
    #[error("duplicate column {column} in table {table}")]
    DuplicateColumn { table: String, column: String },
    #[error("dangling foreign key {table}({columns}) -> {ref_table}({ref_columns}): {reason}")]
    DanglingForeignKey { table: String, columns: String, ref_table: String, ref_columns: String, reason: String },
    #[error("unknown table {0}")]
    TableNotFound(String),
    #[error("cannot read table {table}: {message}")]
    Access { table: String, message: String },
    #[error("database error: {0}")]
    Database(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl From<rusqlite::Error> for SchemaError {
    fn from(e: rusqlite::Error) -> Self {
        SchemaError::Database(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypeClass {
    Numeric,
    Date,
    EnumLike,
    Text,
    Other,
}

impl TypeClass {
    /// Class implied by a declared SQL type alone. Enum-likeness of text
    /// columns needs data and is refined separately.
    pub fn from_declared(declared: &str) -> Self {
        let t = declared.to_ascii_uppercase();
        let has = |needle: &str| t.contains(needle);
        if has("DATE") || has("TIME") {
            TypeClass::Date
        } else if has("BOOL") {
            TypeClass::EnumLike
        } else if has("INT")
            || has("REAL")
            || has("FLOA")
            || has("DOUB")
            || has("NUM")
            || has("DEC")
            || has("MONEY")
        {
            TypeClass::Numeric
        } else if has("CHAR") || has("TEXT") || has("CLOB") || has("STRING") {
            TypeClass::Text
        } else {
            TypeClass::Other
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TypeClass::Numeric => "numeric",
            TypeClass::Date => "date",
            TypeClass::EnumLike => "enum-like",
            TypeClass::Text => "text",
            TypeClass::Other => "other",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub declared_type: String,
    pub class: TypeClass,
}

/// One foreign-key constraint; composite keys stay a single constraint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub columns: Vec<String>,
    pub ref_table: String,
    pub ref_columns: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<Column>,
    #[serde(default)]
    pub primary_key: Vec<String>,
    #[serde(default)]
    pub foreign_keys: Vec<ForeignKey>,
}

impl TableSchema {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatabaseSchema {
    pub name: String,
    pub tables: Vec<TableSchema>,
    /// Data file backing this schema, when one is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_path: Option<PathBuf>,
}

impl DatabaseSchema {
    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn table_names(&self) -> Vec<String> {
        self.tables.iter().map(|t| t.name.clone()).collect()
    }

    /// Checks name uniqueness and that every foreign key resolves on both ends.
    pub fn validate(&self) -> Result<(), SchemaError> {
        let mut seen = BTreeSet::new();
        for t in &self.tables {
            if !seen.insert(t.name.as_str()) {
                return Err(SchemaError::DuplicateTable { database: self.name.clone(), table: t.name.clone() });
            }
            let mut cols = BTreeSet::new();
            for c in &t.columns {
                if !cols.insert(c.name.as_str()) {
                    return Err(SchemaError::DuplicateColumn { table: t.name.clone(), column: c.name.clone() });
                }
            }
        }
        for t in &self.tables {
            for fk in &t.foreign_keys {
                let dangling = |reason: String| SchemaError::DanglingForeignKey {
                    table: t.name.clone(),
                    columns: fk.columns.join(", "),
                    ref_table: fk.ref_table.clone(),
                    ref_columns: fk.ref_columns.join(", "),
                    reason,
                };
                if fk.columns.is_empty() || fk.columns.len() != fk.ref_columns.len() {
                    return Err(dangling("column count mismatch".into()));
                }
                if let Some(c) = fk.columns.iter().find(|c| t.column(c).is_none()) {
                    return Err(dangling(format!("local column {c} does not exist")));
                }
                let Some(target) = self.table(&fk.ref_table) else {
                    return Err(dangling(format!("table {} does not exist", fk.ref_table)));
                };
                if let Some(c) = fk.ref_columns.iter().find(|c| target.column(c).is_none()) {
                    return Err(dangling(format!("column {}.{c} does not exist", fk.ref_table)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaCatalog {
    pub databases: Vec<DatabaseSchema>,
}

impl SchemaCatalog {
    pub fn database(&self, name: &str) -> Option<&DatabaseSchema> {
        self.databases.iter().find(|d| d.name == name)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        self.databases.iter().try_for_each(DatabaseSchema::validate)
    }
}

pub(crate) fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}
