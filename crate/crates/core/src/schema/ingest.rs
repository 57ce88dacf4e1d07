use std::collections::BTreeMap;
use std::path::Path;

use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use sqlparser::ast::{
    AlterTableOperation, ColumnOption, Expr, ForeignKeyConstraint, Ident, IndexColumn, ObjectName, Statement,
    TableConstraint,
};
use sqlparser::dialect::{GenericDialect, SQLiteDialect};
use sqlparser::parser::Parser;

use super::{quote_ident, Column, DatabaseSchema, ForeignKey, SchemaCatalog, SchemaError, TableSchema, TypeClass};
use crate::analysis::error_location;

/// Heuristic that promotes low-cardinality text columns to enum-like.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumDetection {
    pub max_distinct: usize,
    pub sample_rows: usize,
}

impl Default for EnumDetection {
    fn default() -> Self {
        Self { max_distinct: 20, sample_rows: 1000 }
    }
}

fn ident(i: &Ident) -> String {
    i.value.to_lowercase()
}

fn object_name(name: &ObjectName) -> String {
    name.0.last().and_then(|p| p.as_ident()).map(ident).unwrap_or_else(|| name.to_string().to_lowercase())
}

fn index_column(c: &IndexColumn) -> String {
    match &c.column.expr {
        Expr::Identifier(i) => ident(i),
        other => other.to_string().to_lowercase(),
    }
}

fn foreign_key(fk: &ForeignKeyConstraint, local: Option<&str>) -> ForeignKey {
    let columns = match local {
        Some(c) => vec![c.to_string()],
        None => fk.columns.iter().map(ident).collect(),
    };
    ForeignKey {
        columns,
        ref_table: object_name(&fk.foreign_table),
        ref_columns: fk.referred_columns.iter().map(ident).collect(),
    }
}

fn parse_ddl(ddl: &str) -> Result<Vec<Statement>, SchemaError> {
    match Parser::parse_sql(&GenericDialect {}, ddl) {
        Ok(stmts) => Ok(stmts),
        Err(first) => Parser::parse_sql(&SQLiteDialect {}, ddl).map_err(|_| {
            let message = first.to_string();
            let (line, column) = error_location(&message);
            SchemaError::Parse { message, line, column }
        }),
    }
}

/// Parses `CREATE TABLE` statements plus `ALTER TABLE ... ADD` foreign
/// keys. Other statements are ignored. Identifiers are lowercased and
/// the result is validated.
pub fn ingest_ddl(database: &str, ddl: &str) -> Result<DatabaseSchema, SchemaError> {
    let mut tables: Vec<TableSchema> = Vec::new();
    for stmt in parse_ddl(ddl)? {
        match stmt {
            Statement::CreateTable(ct) => {
                let mut t = TableSchema {
                    name: object_name(&ct.name),
                    columns: Vec::new(),
                    primary_key: Vec::new(),
                    foreign_keys: Vec::new(),
                };
                for col in &ct.columns {
                    let name = ident(&col.name);
                    let declared = col.data_type.to_string();
                    for opt in &col.options {
                        match &opt.option {
                            ColumnOption::PrimaryKey(_) => t.primary_key.push(name.clone()),
                            ColumnOption::ForeignKey(fk) => t.foreign_keys.push(foreign_key(fk, Some(&name))),
                            _ => {}
                        }
                    }
                    t.columns.push(Column { class: TypeClass::from_declared(&declared), name, declared_type: declared });
                }
                for c in &ct.constraints {
                    match c {
                        TableConstraint::PrimaryKey(pk) => t.primary_key = pk.columns.iter().map(index_column).collect(),
                        TableConstraint::ForeignKey(fk) => t.foreign_keys.push(foreign_key(fk, None)),
                        _ => {}
                    }
                }
                tables.push(t);
            }
            Statement::AlterTable(at) => {
                let name = object_name(&at.name);
                for op in &at.operations {
                    if let AlterTableOperation::AddConstraint { constraint: TableConstraint::ForeignKey(fk), .. } = op {
                        let t = tables
                            .iter_mut()
                            .find(|t| t.name == name)
                            .ok_or_else(|| SchemaError::TableNotFound(name.clone()))?;
                        t.foreign_keys.push(foreign_key(fk, None));
                    }
                }
            }
            _ => {}
        }
    }
    let mut db = DatabaseSchema { name: database.to_string(), tables, data_path: None };
    resolve_implicit_references(&mut db);
    db.validate()?;
    Ok(db)
}

/// `REFERENCES t` without a column list points at t's primary key.
fn resolve_implicit_references(db: &mut DatabaseSchema) {
    let pks: BTreeMap<String, Vec<String>> =
        db.tables.iter().map(|t| (t.name.clone(), t.primary_key.clone())).collect();
    for t in &mut db.tables {
        for fk in &mut t.foreign_keys {
            if fk.ref_columns.is_empty() {
                if let Some(pk) = pks.get(&fk.ref_table) {
                    fk.ref_columns = pk.clone();
                }
            }
        }
    }
}

/// Reads the schema of a live SQLite database.
pub fn introspect(conn: &Connection, database: &str) -> Result<DatabaseSchema, SchemaError> {
    let mut stmt = conn.prepare(
        "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid",
    )?;
    let names: Vec<String> = stmt.query_map([], |r| r.get(0))?.collect::<Result<_, _>>()?;
    let mut tables = Vec::with_capacity(names.len());
    for raw in names {
        let mut cols = conn.prepare("SELECT name, type, pk FROM pragma_table_info(?1) ORDER BY cid")?;
        let rows: Vec<(String, String, i64)> =
            cols.query_map([&raw], |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)))?.collect::<Result<_, _>>()?;
        let mut pk: Vec<(i64, String)> =
            rows.iter().filter(|r| r.2 > 0).map(|r| (r.2, r.0.to_lowercase())).collect();
        pk.sort();
        let columns = rows
            .iter()
            .map(|(n, ty, _)| Column { name: n.to_lowercase(), class: TypeClass::from_declared(ty), declared_type: ty.clone() })
            .collect();

        let mut fks = conn.prepare(
            "SELECT id, \"table\", \"from\", \"to\" FROM pragma_foreign_key_list(?1) ORDER BY id, seq",
        )?;
        let fk_rows: Vec<(i64, String, String, Option<String>)> = fks
            .query_map([&raw], |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?)))?
            .collect::<Result<_, _>>()?;
        let mut grouped: BTreeMap<i64, ForeignKey> = BTreeMap::new();
        for (id, target, from, to) in fk_rows {
            let fk = grouped.entry(id).or_insert_with(|| ForeignKey {
                columns: Vec::new(),
                ref_table: target.to_lowercase(),
                ref_columns: Vec::new(),
            });
            fk.columns.push(from.to_lowercase());
            if let Some(to) = to {
                fk.ref_columns.push(to.to_lowercase());
            }
        }
        tables.push(TableSchema {
            name: raw.to_lowercase(),
            columns,
            primary_key: pk.into_iter().map(|p| p.1).collect(),
            foreign_keys: grouped.into_values().collect(),
        });
    }
    let mut db = DatabaseSchema { name: database.to_string(), tables, data_path: None };
    resolve_implicit_references(&mut db);
    db.validate()?;
    Ok(db)
}

/// Promotes text columns to enum-like when a sample of at most
/// `sample_rows` non-null values holds between 1 and `max_distinct`
/// distinct values and at least one value repeats. The repeat
/// requirement keeps unique labels in tiny tables as text.
pub fn refine_enum_classes(db: &mut DatabaseSchema, conn: &Connection, cfg: &EnumDetection) -> Result<(), SchemaError> {
    for t in &mut db.tables {
        for c in t.columns.iter_mut().filter(|c| c.class == TypeClass::Text) {
            let col = quote_ident(&c.name);
            let sql = format!(
                "SELECT COUNT(*), COUNT(DISTINCT v) FROM (SELECT {col} AS v FROM {} WHERE {col} IS NOT NULL LIMIT {})",
                quote_ident(&t.name),
                cfg.sample_rows
            );
            let (rows, distinct): (i64, i64) = conn
                .query_row(&sql, [], |r| Ok((r.get(0)?, r.get(1)?)))
                .map_err(|e| SchemaError::Access { table: t.name.clone(), message: e.to_string() })?;
            if distinct >= 1 && distinct as usize <= cfg.max_distinct && rows > distinct {
                c.class = TypeClass::EnumLike;
            }
        }
    }
    Ok(())
}

/// Schema of one SQLite file, from `ddl` when given (declared keys are often
/// richer than what SQLite records), otherwise introspected. Enum-like
/// columns are refined from the data and the file becomes the data path.
pub fn load_sqlite_database(data: &Path, ddl: Option<&Path>, detection: &EnumDetection) -> Result<DatabaseSchema, SchemaError> {
    let io = |p: &Path, e: std::io::Error| SchemaError::Io { path: p.display().to_string(), message: e.to_string() };
    if !data.is_file() {
        return Err(io(data, std::io::Error::new(std::io::ErrorKind::NotFound, "no such database file")));
    }
    let name = data.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let conn = Connection::open_with_flags(data, OpenFlags::SQLITE_OPEN_READ_ONLY)?;
    let mut db = match ddl {
        Some(p) => ingest_ddl(&name, &std::fs::read_to_string(p).map_err(|e| io(p, e))?)?,
        None => introspect(&conn, &name)?,
    };
    refine_enum_classes(&mut db, &conn, detection)?;
    db.data_path = Some(data.to_path_buf());
    Ok(db)
}

/// Loads a benchmark directory laid out as `<db>/schema.sql` plus an
/// optional `<db>/data.db`. Databases without DDL are introspected.
pub fn ingest_benchmark_dir(dir: &Path, detection: &EnumDetection) -> Result<SchemaCatalog, SchemaError> {
    let io = |p: &Path, e: std::io::Error| SchemaError::Io { path: p.display().to_string(), message: e.to_string() };
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    entries.sort();
    let mut catalog = SchemaCatalog::default();
    for path in entries {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let ddl_path = path.join("schema.sql");
        let data_path = path.join("data.db");
        let conn = if data_path.is_file() {
            Some(Connection::open_with_flags(&data_path, OpenFlags::SQLITE_OPEN_READ_ONLY)?)
        } else {
            None
        };
        let mut db = if ddl_path.is_file() {
            let ddl = std::fs::read_to_string(&ddl_path).map_err(|e| io(&ddl_path, e))?;
            ingest_ddl(&name, &ddl)?
        } else if let Some(conn) = &conn {
            introspect(conn, &name)?
        } else {
            continue;
        };
        if let Some(conn) = &conn {
            refine_enum_classes(&mut db, conn, detection)?;
            db.data_path = Some(data_path);
        }
        catalog.databases.push(db);
    }
    Ok(catalog)
}
