//! Text-level rewrites of seed queries, standing in for an expansion model.

use std::sync::LazyLock;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use regex::{Captures, Regex};

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b\d+(?:\.\d+)?\b").expect("valid regex"));
static ALIAS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(?:t|a|x|q|tab|[a-z]{2})(\d)\b").expect("valid regex"));
static COLREF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bt0\.([a-z_]+)\b").expect("valid regex"));
static COMPARISON: LazyLock<Regex> = LazyLock::new(|| Regex::new(r" (>=|<=|>|<) ").expect("valid regex"));
static LIMIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"LIMIT (\d+)$").expect("valid regex"));
static CONJUNCT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r" AND [a-z]+\d\.\w+ (?:>=|<=|<>|>|<|=|LIKE|IN) (?:'(?:[^']|'')*'|[\d.]+|\([^()]*\))").expect("valid regex"));
static AGGREGATE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(SUM|AVG|MAX|MIN)\(").expect("valid regex"));
static SELECT_LIST: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^SELECT (DISTINCT )?([a-z]+\d\.\w+), ([a-z]+\d\.\w+)").expect("valid regex"));
static QUOTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"'(?:[^']|'')*'").expect("valid regex"));

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Rewrite {
    LiteralTweak,
    SwapConnective,
    RenameAliases,
    CteWrap,
    DerivedWrap,
    OrderLimit,
    Distinct,
    Recombine,
    NotNull,
    FlipComparison,
    DropPredicate,
    SwapAggregate,
    TrimProjection,
}

impl Rewrite {
    pub const STRUCTURAL: [Rewrite; 5] =
        [Rewrite::CteWrap, Rewrite::DerivedWrap, Rewrite::Recombine, Rewrite::NotNull, Rewrite::SwapConnective];
    pub const SHALLOW: [Rewrite; 5] =
        [Rewrite::LiteralTweak, Rewrite::RenameAliases, Rewrite::OrderLimit, Rewrite::Distinct, Rewrite::FlipComparison];
    /// Edits that change what the query computes without wrapping it.
    pub const LOGICAL: [Rewrite; 5] =
        [Rewrite::DropPredicate, Rewrite::SwapAggregate, Rewrite::TrimProjection, Rewrite::SwapConnective, Rewrite::NotNull];
}

/// Replaces matches of `re` outside string literals, using `f` on the
/// `pick`-th such match only.
fn replace_nth(sql: &str, re: &Regex, pick: usize, f: impl Fn(&Captures) -> String) -> String {
    let quoted: Vec<(usize, usize)> = QUOTED.find_iter(sql).map(|m| (m.start(), m.end())).collect();
    let inside = |i: usize| quoted.iter().any(|&(a, b)| a <= i && i < b);
    let hits: Vec<Captures> = re.captures_iter(sql).filter(|c| !inside(c.get(0).expect("match").start())).collect();
    let Some(c) = hits.get(pick % hits.len().max(1)) else { return sql.to_string() };
    let m = c.get(0).expect("match");
    format!("{}{}{}", &sql[..m.start()], f(c), &sql[m.end()..])
}

pub(crate) fn rename_aliases(sql: &str, prefix: &str) -> String {
    ALIAS.replace_all(sql, |c: &Captures| format!("{prefix}{}", &c[1])).into_owned()
}

/// A two-letter alias prefix, from 676 possibilities.
pub(crate) fn fresh_prefix(rng: &mut ChaCha8Rng) -> String {
    let letter = |r: &mut ChaCha8Rng| (b'a' + r.random_range(0..26u8)) as char;
    [letter(rng), letter(rng)].iter().collect()
}

fn count_outside_quotes(sql: &str, re: &Regex) -> usize {
    let quoted: Vec<(usize, usize)> = QUOTED.find_iter(sql).map(|m| (m.start(), m.end())).collect();
    re.find_iter(sql).filter(|m| !quoted.iter().any(|&(a, b)| a <= m.start() && m.start() < b)).count()
}

fn tweak_number(text: &str, factor: f64) -> String {
    let v: f64 = text.parse().unwrap_or(1.0);
    let out = v * factor + if v == 0.0 { 1.0 } else { 0.0 };
    if text.contains('.') {
        format!("{out:.2}")
    } else {
        format!("{}", out.round().max(1.0) as i64)
    }
}

/// Applies `kind` to `seed`. `other` is a second seed for recombination.
/// Returns the seed unchanged when the rewrite has nothing to act on.
pub(crate) fn apply(kind: Rewrite, seed: &str, other: Option<&str>, rng: &mut ChaCha8Rng) -> String {
    let seed = seed.trim().trim_end_matches(';').trim();
    match kind {
        Rewrite::LiteralTweak => {
            let n = count_outside_quotes(seed, &NUMBER);
            let pick = rng.random_range(0..n.max(1));
            let factor = [0.5, 0.75, 1.25, 1.5, 2.0].choose(rng).copied().unwrap_or(2.0);
            replace_nth(seed, &NUMBER, pick, |c| tweak_number(&c[0], factor))
        }
        Rewrite::SwapConnective => {
            if seed.contains(" AND ") && !seed.contains(" OR ") {
                seed.replacen(" AND ", " OR ", 1)
            } else if seed.contains(" OR ") {
                seed.replacen(" OR ", " AND ", 1)
            } else {
                seed.to_string()
            }
        }
        Rewrite::RenameAliases => {
            let prefix = ["a", "x", "q", "tab"].choose(rng).copied().unwrap_or("a");
            rename_aliases(seed, prefix)
        }
        Rewrite::CteWrap => {
            let name = ["base", "src", "filtered", "prelim"].choose(rng).copied().unwrap_or("base");
            let limit = rng.random_range(5..=40);
            format!("WITH {name} AS ({seed}) SELECT * FROM {name} LIMIT {limit}")
        }
        Rewrite::DerivedWrap => match rng.random_range(0..2) {
            0 => format!("SELECT COUNT(*) AS row_count FROM ({seed}) AS sub"),
            _ => format!("SELECT * FROM ({seed}) AS sub LIMIT {}", rng.random_range(3..=30)),
        },
        Rewrite::OrderLimit => {
            if let Some(c) = LIMIT.captures(seed) {
                let v: i64 = c[1].parse().unwrap_or(10);
                let next = if v > 5 { v / 2 } else { v * 3 };
                LIMIT.replace(seed, format!("LIMIT {next}")).into_owned()
            } else {
                format!("{seed} LIMIT {}", rng.random_range(5..=60))
            }
        }
        Rewrite::Distinct => {
            if seed.starts_with("SELECT ") && !seed.starts_with("SELECT DISTINCT") {
                seed.replacen("SELECT ", "SELECT DISTINCT ", 1)
            } else {
                format!("SELECT DISTINCT * FROM ({seed}) AS d")
            }
        }
        Rewrite::Recombine => match other {
            Some(o) => {
                let o = o.trim().trim_end_matches(';').trim();
                format!(
                    "SELECT (SELECT COUNT(*) FROM ({seed}) AS l) AS left_rows, (SELECT COUNT(*) FROM ({o}) AS r) AS right_rows"
                )
            }
            None => format!("SELECT COUNT(*) AS row_count FROM ({seed}) AS sub"),
        },
        Rewrite::NotNull => {
            let cols: Vec<String> = COLREF.captures_iter(seed).map(|c| c[1].to_string()).collect();
            match (cols.choose(rng), seed.find(" WHERE ")) {
                (Some(col), Some(i)) if !seed[..i].contains('(') => {
                    format!("{} WHERE t0.{col} IS NOT NULL AND {}", &seed[..i], &seed[i + " WHERE ".len()..])
                }
                _ => format!("SELECT * FROM ({seed}) AS nn WHERE 1 = 1"),
            }
        }
        Rewrite::DropPredicate => {
            let n = count_outside_quotes(seed, &CONJUNCT);
            if n == 0 {
                return apply(Rewrite::LiteralTweak, seed, None, rng);
            }
            let pick = rng.random_range(0..n);
            replace_nth(seed, &CONJUNCT, pick, |_| String::new())
        }
        Rewrite::SwapAggregate => {
            let n = count_outside_quotes(seed, &AGGREGATE);
            if n == 0 {
                return apply(Rewrite::Distinct, seed, None, rng);
            }
            let pick = rng.random_range(0..n);
            let to = ["SUM", "AVG", "MAX", "MIN", "TOTAL"].choose(rng).copied().unwrap_or("AVG");
            replace_nth(seed, &AGGREGATE, pick, |c| if &c[1] == to { "COUNT(".into() } else { format!("{to}(") })
        }
        Rewrite::TrimProjection => match SELECT_LIST.captures(seed) {
            Some(c) => {
                let distinct = c.get(1).map_or("", |m| m.as_str());
                let keep = if rng.random_bool(0.5) { &c[2] } else { &c[3] };
                let end = c.get(0).expect("match").end();
                format!("SELECT {distinct}{keep}{}", &seed[end..])
            }
            None => apply(Rewrite::OrderLimit, seed, None, rng),
        },
        Rewrite::FlipComparison => {
            let n = count_outside_quotes(seed, &COMPARISON);
            if n == 0 {
                return seed.to_string();
            }
            let pick = rng.random_range(0..n);
            replace_nth(seed, &COMPARISON, pick, |c| {
                let op = match &c[1] {
                    ">=" => "<=",
                    "<=" => ">=",
                    ">" => "<",
                    _ => ">",
                };
                format!(" {op} ")
            })
        }
    }
}
