use std::sync::LazyLock;

use regex::Regex;

static FENCE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)```[ \t]*[A-Za-z0-9_+-]*[ \t]*\r?\n(.*?)```").expect("valid regex"));
static NUMBERED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^[ \t]*(?:\*\*)?\(?\d{1,3}[.):](?:\*\*)?[ \t]+").expect("valid regex"));
static SQL_START: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^[ \t`]*(select|with)\b").expect("valid regex"));

/// Pulls SQL statements out of a model response. Fenced code blocks win;
/// otherwise numbered items are tried, then plain semicolon-terminated
/// statements. Prose fragments never survive because every statement must
/// begin with SELECT or WITH.
pub fn extract_sql(response: &str) -> Vec<String> {
    let fenced: Vec<String> = FENCE
        .captures_iter(response)
        .flat_map(|c| split_statements(c.get(1).map_or("", |m| m.as_str())))
        .filter_map(|s| starting_at_sql(&s))
        .collect();
    if !fenced.is_empty() {
        return fenced;
    }
    let numbered = from_numbered(response);
    if !numbered.is_empty() {
        return numbered;
    }
    split_statements(response).iter().filter_map(|s| starting_at_sql(s)).collect()
}

fn from_numbered(text: &str) -> Vec<String> {
    let starts: Vec<(usize, usize)> = NUMBERED.find_iter(text).map(|m| (m.start(), m.end())).collect();
    let mut out = Vec::new();
    for (i, &(_, body)) in starts.iter().enumerate() {
        let end = starts.get(i + 1).map_or(text.len(), |s| s.0);
        let item = &text[body..end];
        // An item ends at its first statement terminator or paragraph break.
        let Some(sql) = starting_at_sql(item) else { continue };
        let cut = split_statements(&sql).into_iter().next().unwrap_or_default();
        let cut = cut.split("\n\n").next().unwrap_or("").trim().trim_matches('`').trim().to_string();
        if !cut.is_empty() {
            out.push(cut);
        }
    }
    out
}

/// The statement from its first line beginning with SELECT/WITH, if any.
fn starting_at_sql(chunk: &str) -> Option<String> {
    let m = SQL_START.captures(chunk)?.get(1)?;
    let s = chunk[m.start()..].trim().trim_end_matches(';').trim().trim_end_matches('`').trim();
    (!s.is_empty()).then(|| s.to_string())
}

/// Splits on semicolons outside quotes and comments; fragments are trimmed
/// and empty ones dropped.
pub fn split_statements(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    let mut quote: Option<char> = None;
    while let Some(c) = chars.next() {
        match quote {
            Some(q) => {
                cur.push(c);
                if c == q {
                    quote = None;
                }
            }
            None => match c {
                '\'' | '"' => {
                    quote = Some(c);
                    cur.push(c);
                }
                '-' if chars.peek() == Some(&'-') => {
                    // Line comment: drop through end of line.
                    for d in chars.by_ref() {
                        if d == '\n' {
                            cur.push('\n');
                            break;
                        }
                    }
                }
                ';' => {
                    let t = cur.trim();
                    if !t.is_empty() {
                        out.push(t.to_string());
                    }
                    cur.clear();
                }
                _ => cur.push(c),
            },
        }
    }
    let t = cur.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
    out
}
