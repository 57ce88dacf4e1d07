use std::sync::LazyLock;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::mutate::{self, Rewrite};
use super::querygen::{parse_schema, QueryGen};
use crate::llm::{BackendError, Completion, CompletionBackend, CompletionRequest};
use crate::util::fnv1a64;

static WANT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"Write (\d+) new").expect("valid regex"));
static CHOOSE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"Choose (\d+) tables").expect("valid regex"));
static FENCED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)```sql\n(.*?)\n```").expect("valid regex"));
static LISTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^- (\w+): NA=(\d+)").expect("valid regex"));
static REFS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-> (\w+)\.").expect("valid regex"));
static PHASE_STATS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"Current phase: (\w+)[\s\S]*executable fraction ([\d.]+)[\s\S]*similarity ([\d.]+)").expect("valid regex")
});

const LONG_SEED: usize = 400;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToyMode {
    /// Structurally varied queries and mostly structural rewrites.
    #[default]
    Diverse,
    /// A handful of query shapes and shallow rewrites, so the workload
    /// quickly fills up with near-duplicates.
    Saturating,
}

/// Deterministic offline model. The answer depends only on the seed, the
/// mode, the role, the per-role sequence number and the prompt text, so
/// repeated runs are identical.
#[derive(Clone, Debug)]
pub struct ToyModel {
    seed: u64,
    mode: ToyMode,
    /// Share of generated queries that reference a missing column.
    pub broken_column_rate: f64,
    /// Share of generated queries cut off mid-statement.
    pub truncation_rate: f64,
}

impl ToyModel {
    pub fn new(seed: u64, mode: ToyMode) -> Self {
        ToyModel { seed, mode, broken_column_rate: 0.04, truncation_rate: 0.02 }
    }

    fn rng(&self, req: &CompletionRequest, seq: u64) -> ChaCha8Rng {
        let mut key = Vec::with_capacity(32);
        key.extend_from_slice(&self.seed.to_le_bytes());
        key.extend_from_slice(req.role.as_str().as_bytes());
        key.extend_from_slice(&seq.to_le_bytes());
        key.extend_from_slice(&fnv1a64(req.prompt.as_bytes()).to_le_bytes());
        ChaCha8Rng::seed_from_u64(fnv1a64(&key))
    }

    fn wanted(prompt: &str, re: &Regex, default: usize) -> usize {
        re.captures(prompt).and_then(|c| c[1].parse().ok()).unwrap_or(default)
    }

    fn damage(&self, sql: String, rng: &mut ChaCha8Rng) -> String {
        let roll: f64 = rng.random();
        if roll < self.broken_column_rate {
            match sql.find("t0.") {
                Some(i) => format!("{}t0.missing_{}", &sql[..i], &sql[i + 3..]),
                None => sql.replacen("SELECT ", "SELECT missing_col, ", 1),
            }
        } else if roll < self.broken_column_rate + self.truncation_rate {
            let cut = sql.len() * 2 / 3;
            let cut = (0..=cut).rev().find(|&i| sql.is_char_boundary(i)).unwrap_or(0);
            format!("{} (", &sql[..cut])
        } else {
            sql
        }
    }

    fn generate(&self, prompt: &str, rng: &mut ChaCha8Rng) -> String {
        let schema = parse_schema(prompt);
        if schema.tables.is_empty() {
            return "I could not find any tables in the request.".into();
        }
        let n = Self::wanted(prompt, &WANT, 5);
        let mut blocks = Vec::with_capacity(n);
        match self.mode {
            ToyMode::Diverse => {
                for _ in 0..n {
                    let q = QueryGen { rng: &mut *rng, schema: &schema }.query();
                    let q = self.damage(q, rng);
                    blocks.push(q);
                }
            }
            ToyMode::Saturating => {
                // A fixed repertoire per schema, varied only in constants.
                let mut fixed = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a64(prompt.as_bytes()));
                let shapes: Vec<String> = (0..3).map(|_| QueryGen { rng: &mut fixed, schema: &schema }.query()).collect();
                for _ in 0..n {
                    let base = shapes.choose(rng).expect("three shapes");
                    blocks.push(mutate::apply(Rewrite::LiteralTweak, base, None, rng));
                }
            }
        }
        fence(&blocks)
    }

    fn expand(&self, prompt: &str, rng: &mut ChaCha8Rng) -> String {
        let seeds: Vec<String> = FENCED.captures_iter(prompt).map(|c| c[1].to_string()).collect();
        if seeds.is_empty() {
            return "There are no seed queries to work from.".into();
        }
        let n = Self::wanted(prompt, &WANT, 5);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let seed = &seeds[i % seeds.len()];
            let other = seeds.choose(rng).map(String::as_str);
            let sql = match self.mode {
                ToyMode::Diverse => {
                    // Two or three edits, occasionally a wrapper or a merge.
                    // Long seeds are never wrapped so queries do not keep
                    // growing across rounds.
                    let mut sql = seed.clone();
                    if seed.len() <= LONG_SEED && rng.random_bool(0.25) {
                        let other = other.filter(|o| o.len() <= LONG_SEED / 2 && seed.len() <= LONG_SEED / 2);
                        let kind = *Rewrite::STRUCTURAL.choose(rng).expect("non-empty");
                        sql = mutate::apply(kind, &sql, other, rng);
                    }
                    for _ in 0..rng.random_range(2..=3) {
                        let pool = if rng.random_bool(0.6) { &Rewrite::LOGICAL } else { &Rewrite::SHALLOW };
                        let kind = *pool.choose(rng).expect("non-empty");
                        sql = mutate::apply(kind, &sql, None, rng);
                    }
                    sql
                }
                ToyMode::Saturating => {
                    // Same query under fresh aliases and constants: close to
                    // the seed, but just distinct enough to get past the critic.
                    let sql = mutate::rename_aliases(seed, &mutate::fresh_prefix(rng));
                    mutate::apply(Rewrite::LiteralTweak, &sql, None, rng)
                }
            };
            out.push(sql);
        }
        fence(&out)
    }

    fn select_tables(&self, prompt: &str, rng: &mut ChaCha8Rng) -> String {
        let n = Self::wanted(prompt, &CHOOSE, 3);
        let mut listed: Vec<(String, Vec<String>)> = Vec::new();
        for line in prompt.lines() {
            if let Some(c) = LISTED.captures(line) {
                let refs = REFS.captures_iter(line).map(|r| r[1].to_string()).collect();
                listed.push((c[1].to_string(), refs));
            }
        }
        if listed.is_empty() {
            return "TABLES:".into();
        }
        // Grow a connected set from a random start along the references.
        let start = rng.random_range(0..listed.len());
        let mut chosen = vec![listed[start].0.clone()];
        while chosen.len() < n.min(listed.len()) {
            let mut next: Vec<&str> = listed
                .iter()
                .filter(|(name, refs)| {
                    !chosen.contains(name)
                        && (refs.iter().any(|r| chosen.contains(r))
                            || listed.iter().any(|(c, cr)| chosen.contains(c) && cr.contains(name)))
                })
                .map(|(name, _)| name.as_str())
                .collect();
            if next.is_empty() {
                next = listed.iter().map(|(n, _)| n.as_str()).filter(|n| !chosen.iter().any(|c| c == n)).collect();
            }
            let pick = next.choose(rng).expect("unchosen tables remain").to_string();
            chosen.push(pick);
        }
        format!("Balancing coverage and join potential.\nTABLES: {}", chosen.join(", "))
    }

    fn advise(&self, prompt: &str) -> String {
        let Some(c) = PHASE_STATS.captures(prompt) else {
            return "DECISION: GEN".into();
        };
        let exec: f64 = c[2].parse().unwrap_or(0.0);
        let sim: f64 = c[3].parse().unwrap_or(1.0);
        let next = if &c[1] == "EXP" && (sim > 0.85 || exec < 0.5) {
            "GEN"
        } else if &c[1] == "EXP" {
            "EXP"
        } else if sim < 0.6 {
            "EXP"
        } else {
            "GEN"
        };
        format!("DECISION: {next}\nSimilarity {sim:.3}, executable fraction {exec:.3}.")
    }
}

fn fence(queries: &[String]) -> String {
    let mut out = String::from("Here are the queries.\n\n");
    for q in queries {
        out.push_str("```sql\n");
        out.push_str(q);
        out.push_str(";\n```\n\n");
    }
    out
}

impl CompletionBackend for ToyModel {
    fn complete(&self, req: &CompletionRequest, seq: u64) -> Result<Completion, BackendError> {
        let mut rng = self.rng(req, seq);
        let p = &req.prompt;
        let text = if p.contains("Seed queries:") {
            self.expand(p, &mut rng)
        } else if p.contains("new SQL queries over these tables") {
            self.generate(p, &mut rng)
        } else if p.contains("TABLES:") {
            self.select_tables(p, &mut rng)
        } else if p.contains("DECISION:") {
            self.advise(p)
        } else {
            return Err(BackendError::Fatal(format!("toy model cannot answer prompt starting {:?}", p.chars().take(60).collect::<String>())));
        };
        Ok(Completion::estimated(&req.prompt, text))
    }

    fn name(&self) -> &str {
        "toy"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{extract_sql, prompts, ModelRole};

    fn req(role: ModelRole, prompt: String) -> CompletionRequest {
        CompletionRequest::for_role(role, prompt)
    }

    const SCHEMA: &str = "CREATE TABLE customers (\n  id INTEGER, -- numeric; range 1 to 300\n  segment TEXT, -- enum-like; values: 'consumer', 'corporate'\n  PRIMARY KEY (id)\n);\n\nCREATE TABLE orders (\n  id INTEGER, -- numeric; range 1 to 1500\n  customer_id INTEGER, -- numeric; range 1 to 300\n  total REAL, -- numeric; range 5.5 to 2999.1\n  PRIMARY KEY (id),\n  FOREIGN KEY (customer_id) REFERENCES customers (id)\n);\n\nJoin paths:\n  orders.customer_id = customers.id";

    #[test]
    fn answers_are_deterministic_and_sized() {
        let m = ToyModel::new(9, ToyMode::Diverse);
        let r = req(ModelRole::Generator, prompts::render(prompts::GENERATION, &[("schema", SCHEMA), ("n", "7")]));
        let a = m.complete(&r, 0).unwrap().text;
        assert_eq!(a, m.complete(&r, 0).unwrap().text);
        assert_ne!(a, m.complete(&r, 1).unwrap().text);
        assert_eq!(extract_sql(&a).len(), 7);

        let seeds = "Seed 1:\n```sql\nSELECT t0.id FROM orders t0 WHERE t0.total > 10\n```";
        let r = req(ModelRole::Expander, prompts::render(prompts::EXPANSION, &[("seeds", seeds), ("n", "4")]));
        assert_eq!(extract_sql(&m.complete(&r, 0).unwrap().text).len(), 4);
    }

    #[test]
    fn table_and_phase_answers() {
        let m = ToyModel::new(1, ToyMode::Saturating);
        let listing = "- a: NA=2, RD=0, DRT=0, queries=0; columns: id, x\n- b: NA=3, RD=1, DRT=1, queries=0; columns: id, a_id, y; references: a_id -> a.id\n- c: NA=1, RD=0, DRT=0, queries=0; columns: id";
        let r = req(ModelRole::Reasoner, prompts::render(prompts::TABLE_SELECTION, &[("tables", listing), ("n", "2")]));
        let mut got = crate::agents::parse_table_answer(&m.complete(&r, 0).unwrap().text);
        got.sort();
        // The two picks are connected unless the start was the isolated table.
        assert!(got == ["a", "b"] || got.contains(&"c".to_string()), "{got:?}");
        let r = req(ModelRole::Reasoner, "Current phase: EXP\nexecutable fraction 0.9, accepted 3, mean nearest-neighbour similarity 0.95\nDECISION: GEN or EXP".into());
        assert_eq!(crate::agents::parse_advice(&m.complete(&r, 0).unwrap().text), Some(crate::pool::Origin::Gen));
    }
}
