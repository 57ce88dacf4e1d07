use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::{ContentHints, DatabaseSchema, SchemaError};

/// Renders the selected tables as annotated DDL for a prompt: columns with
/// type class and inline hints, keys, then join paths between selected
/// tables. Tables appear in schema order regardless of `tables` order.
pub fn render_schema_block(
    db: &DatabaseSchema,
    tables: &[String],
    hints: &BTreeMap<String, ContentHints>,
) -> Result<String, SchemaError> {
    if let Some(missing) = tables.iter().find(|t| db.table(t).is_none()) {
        return Err(SchemaError::TableNotFound(missing.clone()));
    }
    let wanted: BTreeSet<&str> = tables.iter().map(String::as_str).collect();
    let mut out = String::new();
    let mut joins = Vec::new();
    for t in db.tables.iter().filter(|t| wanted.contains(t.name.as_str())) {
        let h = hints.get(&t.name);
        writeln!(out, "CREATE TABLE {} (", t.name).unwrap();
        let mut lines: Vec<String> = Vec::new();
        for c in &t.columns {
            let mut note = c.class.as_str().to_string();
            if let Some(ch) = h.and_then(|h| h.column(&c.name)) {
                if let Some((lo, hi)) = &ch.range {
                    write!(note, "; range {lo} to {hi}").unwrap();
                } else if !ch.values.is_empty() {
                    let label = if c.class == super::TypeClass::Text { "examples" } else { "values" };
                    let vals: Vec<String> = ch.values.iter().map(ToString::to_string).collect();
                    write!(note, "; {label}: {}", vals.join(", ")).unwrap();
                }
            }
            lines.push(format!("  {} {}, -- {note}", c.name, c.declared_type));
        }
        if !t.primary_key.is_empty() {
            lines.push(format!("  PRIMARY KEY ({}),", t.primary_key.join(", ")));
        }
        for fk in &t.foreign_keys {
            lines.push(format!(
                "  FOREIGN KEY ({}) REFERENCES {} ({}),",
                fk.columns.join(", "),
                fk.ref_table,
                fk.ref_columns.join(", ")
            ));
            if wanted.contains(fk.ref_table.as_str()) {
                let on: Vec<String> = fk
                    .columns
                    .iter()
                    .zip(&fk.ref_columns)
                    .map(|(l, r)| format!("{}.{l} = {}.{r}", t.name, fk.ref_table))
                    .collect();
                joins.push(on.join(" AND "));
            }
        }
        // The trailing comma of the last definition line goes, its comment stays.
        if let Some(last) = lines.last_mut() {
            *last = match last.find(", --") {
                Some(at) => format!("{}{}", &last[..at], &last[at + 1..]),
                None => last.trim_end_matches(',').to_string(),
            };
        }
        for l in lines {
            writeln!(out, "{l}").unwrap();
        }
        out.push_str(");\n");
        if h.is_some_and(|h| h.empty) {
            out.push_str("-- table has no rows\n");
        }
        out.push('\n');
    }
    if !joins.is_empty() {
        out.push_str("Join paths:\n");
        for j in joins {
            writeln!(out, "  {j}").unwrap();
        }
    }
    Ok(out.trim_end().to_string() + "\n")
}
