//! Lexical tokenizer used by token-level similarity and length statistics.
//!
//! Keywords and identifiers are lowercased, punctuation becomes one token per
//! symbol (multi-character operators stay together) and literals are kept
//! verbatim, quotes included. Comments and whitespace are dropped.

const MULTI_CHAR_OPS: [&str; 8] = ["<=", ">=", "<>", "!=", "==", "||", "<<", ">>"];

/// Splits SQL text into lexical tokens. Total: never fails, an empty or
/// whitespace-only input yields an empty sequence.
pub fn tokenize(sql: &str) -> Vec<String> {
    let chars: Vec<char> = sql.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        // -- line comment
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                i += 1;
            }
            i = (i + 2).min(chars.len());
            continue;
        }
        if c == '\'' {
            let end = scan_quoted(&chars, i, '\'');
            tokens.push(chars[i..end].iter().collect());
            i = end;
            continue;
        }
        if c == '"' || c == '`' || c == '[' {
            let close = if c == '[' { ']' } else { c };
            let end = scan_quoted(&chars, i, close);
            let quoted: String = chars[i..end].iter().collect();
            tokens.push(quoted.to_lowercase());
            i = end;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.') {
                // exponent sign: 1e-5
                if (chars[i] == 'e' || chars[i] == 'E')
                    && matches!(chars.get(i + 1), Some('+') | Some('-'))
                {
                    i += 1;
                }
                i += 1;
            }
            tokens.push(chars[start..i].iter().collect());
            continue;
        }
        if c.is_alphanumeric() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            tokens.push(word.to_lowercase());
            continue;
        }
        if let Some(next) = chars.get(i + 1) {
            let pair: String = [c, *next].iter().collect();
            if MULTI_CHAR_OPS.contains(&pair.as_str()) {
                tokens.push(pair);
                i += 2;
                continue;
            }
        }
        tokens.push(c.to_string());
        i += 1;
    }
    tokens
}

/// Returns the index one past the closing quote. Doubled quotes escape.
/// An unterminated literal runs to the end of input.
fn scan_quoted(chars: &[char], start: usize, close: char) -> usize {
    let mut i = start + 1;
    while i < chars.len() {
        if chars[i] == close {
            if close != ']' && chars.get(i + 1) == Some(&close) {
                i += 2;
                continue;
            }
            return i + 1;
        }
        i += 1;
    }
    chars.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_projection() {
        assert_eq!(tokenize("SELECT a, b"), vec!["select", "a", ",", "b"]);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t").is_empty());
    }

    #[test]
    fn literals_kept_verbatim() {
        let toks = tokenize("SELECT * FROM t WHERE name = 'Bob Smith' AND x >= 3.5e-2");
        assert!(toks.contains(&"'Bob Smith'".to_string()));
        assert!(toks.contains(&">=".to_string()));
        assert!(toks.contains(&"3.5e-2".to_string()));
        assert_eq!(toks[0], "select");
    }

    #[test]
    fn escaped_quote_and_comments() {
        let toks = tokenize("select 'it''s' -- trailing\n/* block */ from t");
        assert_eq!(toks, vec!["select", "'it''s'", "from", "t"]);
    }
}
