//! Versioned prompt templates. Placeholders are written `{{name}}`; lines
//! starting with `#` are template metadata and are stripped on rendering.

pub const GENERATION: &str = include_str!("../../assets/prompts/generation.txt");
pub const EXPANSION: &str = include_str!("../../assets/prompts/expansion.txt");
pub const TABLE_SELECTION: &str = include_str!("../../assets/prompts/table_selection.txt");
pub const MANAGEMENT: &str = include_str!("../../assets/prompts/management.txt");

/// The `# template: <name> <version>` header of a template.
pub fn version(template: &str) -> Option<&str> {
    template.lines().next()?.strip_prefix("# template: ")
}

/// Substitutes every placeholder. Panics if one is left unfilled, since that
/// is a programming error in the caller.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out: String = template
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    out.push('\n');
    for (k, v) in vars {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    if let Some(i) = out.find("{{") {
        let rest = &out[i..];
        let end = rest.find("}}").map_or(rest.len(), |e| e + 2);
        panic!("unfilled placeholder {}", &rest[..end]);
    }
    out
}
