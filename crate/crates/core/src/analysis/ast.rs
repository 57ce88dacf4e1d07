//! Normalized, ordered query trees.
//!
//! Statements are parsed with `sqlparser` (SQLite dialect) and lowered into a
//! compact ordered tree of `(kind, payload)` labels. Identifiers are
//! lowercased and literal values collapse into class tags, so two queries
//! that differ only in identifier case or constants produce equal trees.

use std::collections::HashMap;
use std::fmt;
use std::sync::{LazyLock, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sqlparser::ast::Statement;
use sqlparser::dialect::SQLiteDialect;
use sqlparser::parser::Parser;

use super::AnalysisError;

/// Literal classes that replace concrete constants in the normalized tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LiteralClass {
    Num,
    Str,
    Date,
    Null,
    Bool,
    Param,
}

impl LiteralClass {
    pub fn tag(self) -> &'static str {
        match self {
            LiteralClass::Num => "NUM",
            LiteralClass::Str => "STR",
            LiteralClass::Date => "DATE",
            LiteralClass::Null => "NULL",
            LiteralClass::Bool => "BOOL",
            LiteralClass::Param => "PARAM",
        }
    }

    /// Canonical constant used when rendering a normalized tree back to SQL.
    fn placeholder(self, original: &Value) -> Value {
        match self {
            LiteralClass::Num => serde_json::json!({ "Number": ["0", false] }),
            LiteralClass::Str => serde_json::json!({ "SingleQuotedString": "s" }),
            LiteralClass::Date => serde_json::json!({ "SingleQuotedString": "2000-01-01" }),
            LiteralClass::Null => Value::String("Null".into()),
            LiteralClass::Bool => serde_json::json!({ "Boolean": true }),
            LiteralClass::Param => original.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label {
    pub kind: String,
    pub payload: Option<String>,
}

impl Label {
    pub fn new(kind: impl Into<String>, payload: Option<String>) -> Self {
        Self { kind: kind.into(), payload }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.payload {
            Some(p) => write!(f, "{}({})", self.kind, p),
            None => f.write_str(&self.kind),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstNode {
    pub label: Label,
    pub children: Vec<AstNode>,
}

impl AstNode {
    pub fn leaf(kind: impl Into<String>, payload: Option<String>) -> Self {
        Self { label: Label::new(kind, payload), children: Vec::new() }
    }

    pub fn with_children(kind: impl Into<String>, children: Vec<AstNode>) -> Self {
        Self { label: Label::new(kind, None), children }
    }

    pub fn kind(&self) -> &str {
        &self.label.kind
    }

    pub fn payload(&self) -> Option<&str> {
        self.label.payload.as_deref()
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(AstNode::size).sum::<usize>()
    }

    /// Pre-order walk.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a AstNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    fn fmt_indented(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        writeln!(f, "{:indent$}{}", "", self.label, indent = depth * 2)?;
        for c in &self.children {
            c.fmt_indented(f, depth + 1)?;
        }
        Ok(())
    }
}

/// Process-wide label numbering, so tree comparisons test integers.
static LABEL_IDS: LazyLock<Mutex<HashMap<Label, u32>>> = LazyLock::new(|| Mutex::new(HashMap::new()));

fn intern(labels: &[Label]) -> Vec<u32> {
    let mut table = LABEL_IDS.lock().expect("label table poisoned");
    labels
        .iter()
        .map(|l| {
            let next = table.len() as u32;
            *table.entry(l.clone()).or_insert(next)
        })
        .collect()
}

/// Post-order layout consumed by tree edit distance.
#[derive(Clone, Debug, Default)]
pub struct Postorder {
    pub labels: Vec<Label>,
    /// Interned `labels`: equal ids exactly when labels are equal.
    pub ids: Vec<u32>,
    /// `ids` sorted, for multiset bounds.
    pub sorted_ids: Vec<u32>,
    /// Left-most leaf descendant of each node, as a post-order index.
    pub leftmost: Vec<usize>,
    /// Zhang–Shasha key roots, ascending.
    pub keyroots: Vec<usize>,
}

impl Postorder {
    pub fn from_root(root: &AstNode) -> Self {
        fn visit(node: &AstNode, labels: &mut Vec<Label>, leftmost: &mut Vec<usize>) -> usize {
            let mut first_leaf = None;
            for c in &node.children {
                let lm = visit(c, labels, leftmost);
                first_leaf.get_or_insert(lm);
            }
            let idx = labels.len();
            labels.push(node.label.clone());
            let lm = first_leaf.unwrap_or(idx);
            leftmost.push(lm);
            lm
        }
        let mut labels = Vec::new();
        let mut leftmost = Vec::new();
        visit(root, &mut labels, &mut leftmost);
        let n = labels.len();
        let mut seen = vec![false; n];
        let mut keyroots = Vec::new();
        for i in (0..n).rev() {
            if !seen[leftmost[i]] {
                seen[leftmost[i]] = true;
                keyroots.push(i);
            }
        }
        keyroots.reverse();
        let ids = intern(&labels);
        let mut sorted_ids = ids.clone();
        sorted_ids.sort_unstable();
        Self { labels, ids, sorted_ids, leftmost, keyroots }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// A parsed, normalized query tree.
#[derive(Clone, Debug)]
pub struct QueryAst {
    root: AstNode,
    rendered: String,
    post: Postorder,
}

impl PartialEq for QueryAst {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl Eq for QueryAst {}

impl QueryAst {
    pub fn root(&self) -> &AstNode {
        &self.root
    }

    /// Node count.
    pub fn len(&self) -> usize {
        self.post.len()
    }

    pub fn is_empty(&self) -> bool {
        self.post.is_empty()
    }

    pub fn postorder(&self) -> &Postorder {
        &self.post
    }

    /// SQL text for the normalized tree: identifiers lowercased and every
    /// constant replaced by a canonical value of its class. Parsing this text
    /// yields an equal tree.
    pub fn render(&self) -> &str {
        &self.rendered
    }

    /// Builds an ad-hoc tree, mainly for metric tests.
    pub fn from_root(root: AstNode) -> Self {
        let post = Postorder::from_root(&root);
        Self { root, rendered: String::new(), post }
    }

    /// Normalizing an already-normalized tree: lowercases identifier payloads.
    /// Literal payloads are class tags already, so this is the identity on
    /// any tree produced by [`parse`].
    pub fn renormalized(&self) -> QueryAst {
        fn norm(n: &AstNode) -> AstNode {
            let payload = match n.kind() {
                "Ident" | "Identifier" => n.payload().map(str::to_lowercase),
                _ => n.label.payload.clone(),
            };
            AstNode {
                label: Label::new(n.label.kind.clone(), payload),
                children: n.children.iter().map(norm).collect(),
            }
        }
        let root = norm(&self.root);
        let post = Postorder::from_root(&root);
        QueryAst { root, rendered: self.rendered.clone(), post }
    }
}

impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt_indented(f, 0)
    }
}

/// Parses exactly one query statement into a normalized tree.
pub fn parse(sql: &str) -> Result<QueryAst, AnalysisError> {
    let stmt = parse_statement(sql)?;
    let mut json = serde_json::to_value(&stmt).map_err(|e| AnalysisError::Internal(e.to_string()))?;
    normalize_json(&mut json, false);
    let rendered = render_json(json.clone())?;
    let mut root = AstNode::with_children("Query", Vec::new());
    let mut forest = convert(&json);
    if forest.len() == 1 {
        root = forest.remove(0);
    } else {
        root.children = forest;
    }
    // A bare top-level query collapses onto its body.
    if root.kind() == "Query" && root.children.len() == 1 {
        root = root.children.remove(0);
    }
    let post = Postorder::from_root(&root);
    Ok(QueryAst { root, rendered, post })
}

/// Canonical rendering with constants preserved: identifiers lowercased,
/// whitespace and keyword case normalized by the printer.
pub fn canonical_text(sql: &str) -> Result<String, AnalysisError> {
    let stmt = parse_statement(sql)?;
    let mut json = serde_json::to_value(&stmt).map_err(|e| AnalysisError::Internal(e.to_string()))?;
    normalize_json(&mut json, true);
    render_json(json)
}

pub(crate) fn parse_statement(sql: &str) -> Result<Statement, AnalysisError> {
    if sql.trim().is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut stmts = Parser::parse_sql(&SQLiteDialect {}, sql).map_err(syntax_error)?;
    match stmts.len() {
        0 => Err(AnalysisError::Empty),
        1 => {
            let stmt = stmts.remove(0);
            match stmt {
                Statement::Query(_) => Ok(stmt),
                other => Err(AnalysisError::NotAQuery(statement_kind(&other))),
            }
        }
        n => Err(AnalysisError::MultipleStatements(n)),
    }
}

fn statement_kind(stmt: &Statement) -> String {
    let text = stmt.to_string();
    text.split_whitespace().next().unwrap_or("statement").to_uppercase()
}

fn syntax_error(err: sqlparser::parser::ParserError) -> AnalysisError {
    let message = err.to_string();
    let (line, column) = error_location(&message);
    AnalysisError::Syntax { message, line, column }
}

/// Extracts the `(line, column)` sqlparser embeds in its messages; `(0, 0)`
/// when absent.
pub(crate) fn error_location(message: &str) -> (u64, u64) {
    let re = regex::Regex::new(r"Line: (\d+), Column: (\d+)").expect("static regex");
    re.captures(message)
        .map(|c| (c[1].parse().unwrap_or(0), c[2].parse().unwrap_or(0)))
        .unwrap_or((0, 0))
}

fn render_json(json: Value) -> Result<String, AnalysisError> {
    let stmt: Statement =
        serde_json::from_value(json).map_err(|e| AnalysisError::Internal(e.to_string()))?;
    Ok(stmt.to_string())
}

fn is_ident(obj: &Map<String, Value>) -> bool {
    obj.contains_key("quote_style") && obj.get("value").is_some_and(Value::is_string)
}

fn literal_class(obj: &Map<String, Value>) -> Option<LiteralClass> {
    if obj.len() != 2 || !obj.contains_key("span") {
        return None;
    }
    classify_value(obj.get("value")?)
}

fn classify_value(v: &Value) -> Option<LiteralClass> {
    match v {
        Value::String(s) if s == "Null" => Some(LiteralClass::Null),
        Value::Object(o) if o.len() == 1 => {
            let (k, inner) = o.iter().next()?;
            Some(match k.as_str() {
                "Number" => LiteralClass::Num,
                "Boolean" => LiteralClass::Bool,
                "Placeholder" => LiteralClass::Param,
                k if k.contains("String") || k.contains("Literal") => {
                    let text = match inner {
                        Value::String(s) => s.as_str(),
                        _ => "",
                    };
                    if looks_like_date(text) {
                        LiteralClass::Date
                    } else {
                        LiteralClass::Str
                    }
                }
                _ => return None,
            })
        }
        _ => None,
    }
}

fn looks_like_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() >= 10
        && b[..4].iter().all(u8::is_ascii_digit)
        && b[4] == b'-'
        && b[5..7].iter().all(u8::is_ascii_digit)
        && b[7] == b'-'
        && b[8..10].iter().all(u8::is_ascii_digit)
}

/// Lowercases identifiers in place; unless `keep_literals`, replaces every
/// literal by its class placeholder.
fn normalize_json(v: &mut Value, keep_literals: bool) {
    match v {
        Value::Array(items) => items.iter_mut().for_each(|i| normalize_json(i, keep_literals)),
        Value::Object(obj) => {
            if is_ident(obj) {
                if let Some(Value::String(s)) = obj.get_mut("value") {
                    *s = s.to_lowercase();
                }
                return;
            }
            if !keep_literals {
                if let Some(class) = literal_class(obj) {
                    let original = obj["value"].clone();
                    obj.insert("value".into(), class.placeholder(&original));
                    return;
                }
            }
            for (_, child) in obj.iter_mut() {
                normalize_json(child, keep_literals);
            }
        }
        _ => {}
    }
}

/// Fields spliced into their parent instead of getting their own node.
const TRANSPARENT_FIELDS: &[&str] =
    &["body", "relation", "left", "right", "expr", "name", "join_operator", "args"];

fn skip_field(key: &str) -> bool {
    key == "span" || key == "token" || key.ends_with("_token") || key == "flavor"
}

fn is_noise(v: &Value) -> bool {
    match v {
        Value::Null | Value::Bool(false) => true,
        Value::Array(a) => a.is_empty(),
        Value::Object(o) => o.is_empty(),
        Value::String(s) => s == "None",
        _ => false,
    }
}

fn is_enum_object(obj: &Map<String, Value>) -> bool {
    obj.len() == 1 && obj.keys().next().is_some_and(|k| k.starts_with(|c: char| c.is_ascii_uppercase()))
}

fn is_query_struct(v: &Value) -> bool {
    matches!(v, Value::Object(o) if o.contains_key("body") && o.contains_key("with"))
}

fn is_plain_struct(v: &Value) -> bool {
    matches!(v, Value::Object(o) if !is_ident(o) && literal_class(o).is_none() && !is_enum_object(o))
}

fn convert(v: &Value) -> Vec<AstNode> {
    match v {
        Value::Null | Value::Bool(_) => Vec::new(),
        Value::Number(n) => vec![AstNode::leaf("Number", Some(n.to_string()))],
        Value::String(s) => {
            if is_noise(v) {
                Vec::new()
            } else {
                vec![AstNode::leaf(s.clone(), None)]
            }
        }
        Value::Array(items) => items.iter().flat_map(convert).collect(),
        Value::Object(obj) => {
            if is_ident(obj) {
                return vec![ident_leaf("Ident", obj)];
            }
            if let Some(class) = literal_class(obj) {
                return vec![AstNode::leaf("Literal", Some(class.tag().to_string()))];
            }
            if is_enum_object(obj) {
                let (variant, inner) = obj.iter().next().expect("enum object has one key");
                if let Value::Object(inner_obj) = inner {
                    if variant == "Identifier" && is_ident(inner_obj) {
                        return vec![ident_leaf("Identifier", inner_obj)];
                    }
                    if let Some(class) = literal_class(inner_obj) {
                        return vec![AstNode::leaf("Literal", Some(class.tag().to_string()))];
                    }
                }
                let children = match inner {
                    Value::Object(inner_obj) if variant == "Query" && is_query_struct(inner) => {
                        struct_fields(inner_obj)
                    }
                    other => convert(other),
                };
                let scalar_inner = !matches!(inner, Value::Object(_) | Value::Array(_));
                if children.is_empty() && !scalar_inner {
                    return Vec::new();
                }
                return vec![AstNode::with_children(variant.clone(), children)];
            }
            let fields = struct_fields(obj);
            if is_query_struct(v) {
                vec![AstNode::with_children("Query", fields)]
            } else {
                fields
            }
        }
    }
}

fn ident_leaf(kind: &str, obj: &Map<String, Value>) -> AstNode {
    let value = obj.get("value").and_then(Value::as_str).unwrap_or_default();
    AstNode::leaf(kind, Some(value.to_lowercase()))
}

fn struct_fields(obj: &Map<String, Value>) -> Vec<AstNode> {
    let mut out = Vec::new();
    for (key, value) in obj {
        if skip_field(key) || is_noise(value) {
            continue;
        }
        match value {
            Value::Bool(true) => out.push(AstNode::leaf(key.clone(), None)),
            Value::String(s) => out.push(AstNode::leaf(key.clone(), Some(s.clone()))),
            Value::Number(n) => out.push(AstNode::leaf(key.clone(), Some(n.to_string()))),
            Value::Array(items) if items.iter().all(is_plain_struct) && !is_query_struct(value) => {
                for item in items {
                    let fields = match item {
                        Value::Object(o) => struct_fields(o),
                        _ => unreachable!("checked by is_plain_struct"),
                    };
                    if is_query_struct(item) {
                        out.push(AstNode::with_children(
                            key.clone(),
                            vec![AstNode::with_children("Query", fields)],
                        ));
                    } else if !fields.is_empty() {
                        out.push(AstNode::with_children(key.clone(), fields));
                    }
                }
            }
            _ => {
                let children = convert(value);
                if children.is_empty() {
                    continue;
                }
                if TRANSPARENT_FIELDS.contains(&key.as_str()) {
                    out.extend(children);
                } else {
                    out.push(AstNode::with_children(key.clone(), children));
                }
            }
        }
    }
    out
}
