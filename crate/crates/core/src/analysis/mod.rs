//! SQL parsing, tokenization and structural feature extraction.

mod ast;
mod features;
mod tokenize;

use std::collections::BTreeSet;

pub(crate) use ast::error_location;
pub use ast::{canonical_text, parse, AstNode, Label, LiteralClass, Postorder, QueryAst};
pub use features::{referenced_tables, structural_features, StructuralFeatures};
pub use tokenize::tokenize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("empty query text")]
    Empty,
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { message: String, line: u64, column: u64 },
    #[error("expected a single statement, found {0}")]
    MultipleStatements(usize),
    #[error("not a query: {0} statement")]
    NotAQuery(String),
    #[error("internal normalization failure: {0}")]
    Internal(String),
}

/// Everything the similarity, pool and report layers need from one query.
#[derive(Clone, Debug)]
pub struct AnalyzedQuery {
    pub sql: String,
    /// Canonical rendering with constants kept; the pool's uniqueness key.
    pub canonical: String,
    pub tokens: Vec<String>,
    pub ast: QueryAst,
    pub tables: BTreeSet<String>,
    pub features: StructuralFeatures,
}

/// Parses and fully analyzes one query.
pub fn analyze(sql: &str) -> Result<AnalyzedQuery, AnalysisError> {
    let sql = sql.trim().trim_end_matches(';').trim();
    let ast = parse(sql)?;
    let canonical = canonical_text(sql)?;
    let tokens = tokenize(sql);
    let tables = referenced_tables(&ast);
    let features = structural_features(&ast, tokens.len());
    Ok(AnalyzedQuery { sql: sql.to_string(), canonical, tokens, ast, tables, features })
}
