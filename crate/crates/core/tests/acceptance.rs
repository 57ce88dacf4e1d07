//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; any failure makes the target fail.

mod common;
mod oracles;

use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqlforge::analysis::analyze;
use sqlforge::exec::{ExecutionTool, SqliteHarness};
use sqlforge::llm::{fallback_encode, FallbackEncoder};
use sqlforge::orchestrator::*;
use sqlforge::pool::{NewQuery, Origin, RetrievalMode, SqlPool, CANDIDATE_MULTIPLIER};
use sqlforge::report::{workload_report, Corpus, Histogram, ReportOptions};
use sqlforge::schema::{drt, ingest_ddl, profile_all};
use sqlforge::similarity::*;
use sqlforge::toy::ToyMode;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

// ---------------------------------------------------------------------------
// Synthetic queries over the toy schema.

const TABLES: [(&str, &[&str]); 6] = [
    ("region", &["id", "name", "country"]),
    ("customers", &["id", "name", "segment", "region_id", "signup_date", "credit_limit"]),
    ("products", &["id", "name", "category", "price", "stock"]),
    ("orders", &["id", "customer_id", "order_date", "status", "total"]),
    ("order_items", &["id", "order_id", "product_id", "quantity", "unit_price", "discount"]),
    ("payments", &["id", "order_id", "method", "amount", "paid_at"]),
];

/// (child, fk column, parent)
const JOINS: [(usize, &str, usize); 5] =
    [(1, "region_id", 0), (3, "customer_id", 1), (4, "order_id", 3), (4, "product_id", 2), (5, "order_id", 3)];

fn synthetic_query(rng: &mut ChaCha8Rng) -> String {
    let ops = ["=", "<", ">", "<=", ">=", "<>"];
    let aggs = ["COUNT", "SUM", "AVG", "MIN", "MAX"];
    let t = rng.random_range(0..TABLES.len());
    let (name, cols) = TABLES[t];
    let col = |rng: &mut ChaCha8Rng, cols: &[&str]| cols[rng.random_range(0..cols.len())].to_string();
    let mut from = format!("{name} AS a");
    let mut other: Option<&[&str]> = None;
    let joins: Vec<_> = JOINS.iter().filter(|j| j.0 == t || j.2 == t).collect();
    if !joins.is_empty() && rng.random_bool(0.4) {
        let &&(child, fk, parent) = &joins[rng.random_range(0..joins.len())];
        let (o, on) = if child == t { (parent, format!("a.{fk} = b.id")) } else { (child, format!("b.{fk} = a.id")) };
        from += &format!(" JOIN {} AS b ON {on}", TABLES[o].0);
        other = Some(TABLES[o].1);
    }
    let grouped = rng.random_bool(0.3);
    let key = format!("a.{}", col(rng, cols));
    let mut select: Vec<String> = Vec::new();
    if grouped {
        select.push(key.clone());
        select.push(format!("{}(a.{})", aggs[rng.random_range(0..aggs.len())], col(rng, cols)));
    } else {
        for _ in 0..rng.random_range(1..4) {
            select.push(format!("a.{}", col(rng, cols)));
        }
        if let Some(oc) = other {
            if rng.random_bool(0.5) {
                select.push(format!("b.{}", col(rng, oc)));
            }
        }
    }
    let mut preds = Vec::new();
    for _ in 0..rng.random_range(0..4) {
        let c = col(rng, cols);
        let v = rng.random_range(0..10_000);
        preds.push(format!("a.{c} {} {v}", ops[rng.random_range(0..ops.len())]));
    }
    if rng.random_bool(0.2) {
        let (sub, sub_cols) = TABLES[rng.random_range(0..TABLES.len())];
        preds.push(format!("a.id IN (SELECT id FROM {sub} WHERE {} > {})", col(rng, sub_cols), rng.random_range(0..500)));
    }
    let mut sql = format!("SELECT {} FROM {from}", select.join(", "));
    if !preds.is_empty() {
        sql += &format!(" WHERE {}", preds.join(if rng.random_bool(0.7) { " AND " } else { " OR " }));
    }
    if grouped {
        sql += &format!(" GROUP BY {key}");
    }
    if rng.random_bool(0.3) {
        sql += &format!(" ORDER BY {} DESC", select[0]);
    }
    if rng.random_bool(0.3) {
        sql += &format!(" LIMIT {}", rng.random_range(1..100));
    }
    sql
}

fn fingerprint(sql: &str) -> QueryFingerprint {
    QueryFingerprint::from_analyzed(&analyze(sql).unwrap(), fallback_encode(sql).unwrap())
}

// ---------------------------------------------------------------------------

fn metric_exactness() -> Outcome {
    let start = Instant::now();
    let w = HybridWeights::default();
    let combined = w.combine(0.5, 0.2, 0.8);
    ensure!((combined - 0.44).abs() <= 1e-9, "combine(0.5, 0.2, 0.8) = {combined}");

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fps: Vec<QueryFingerprint> = (0..200).map(|_| fingerprint(&synthetic_query(&mut rng))).collect();
    for f in &fps {
        let s = hybrid(f, f, &w).unwrap().combined;
        ensure!(s == 1.0, "self-similarity {s}");
    }
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (i, j) = (rng.random_range(0..fps.len()), rng.random_range(0..fps.len()));
        let (ab, ba) = (hybrid(&fps[i], &fps[j], &w).unwrap(), hybrid(&fps[j], &fps[i], &w).unwrap());
        worst = worst.max((ab.combined - ba.combined).abs());
        ensure!((0.0..=1.0).contains(&ab.combined), "score {} out of range", ab.combined);
    }
    ensure!(worst < 1e-12, "asymmetry {worst}");
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(5), "took {t:?}");
    Ok(format!("combine = {combined}, max asymmetry {worst:e} over 1000 pairs"))
}

fn ast_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..200 {
        let (ta, a) = oracles::random_tree(&mut rng, 12);
        let (tb, b) = oracles::random_tree(&mut rng, 12);
        let (got, want) = (sim_ast(&a, &b), oracles::sim_ast_oracle(&ta, &tb));
        ensure!(got == want, "pair {i}: sim_ast {got}, oracle {want}");
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(30), "took {t:?}");
    Ok("200 random pairs agree exactly".into())
}

fn vendi_cases() -> Outcome {
    let start = Instant::now();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6;
    let ones = vendi_score(&oracles::matrix(&vec![vec![1.0; 10]; 10])).unwrap();
    ensure!(close(ones, 1.0), "all-ones {ones}");
    let identity: Vec<Vec<f64>> = (0..50).map(|i| (0..50).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let id = vendi_score(&oracles::matrix(&identity)).unwrap();
    ensure!(close(id, 50.0), "identity {id}");
    let pairs = vec![vec![1.0, 1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 1.0], vec![0.0, 0.0, 1.0, 1.0]];
    let two = vendi_score(&oracles::matrix(&pairs)).unwrap();
    ensure!(close(two, 2.0), "two identical pairs {two}");
    let mut worst = 0.0f64;
    for (i, n) in [1, 2, 5, 10, 20, 35, 50].into_iter().enumerate() {
        for d in [2, 8, 64] {
            let k = oracles::random_gram(n, d, (i * 100 + d) as u64);
            let (got, want) = (vendi_score(&oracles::matrix(&k)).unwrap(), oracles::vendi_oracle(&k));
            worst = worst.max((got - want).abs());
        }
    }
    ensure!(worst <= 1e-6, "random PSD deviation {worst}");
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(10), "took {t:?}");
    Ok(format!("1 / 50 / 2 as expected, random PSD max deviation {worst:.1e}"))
}

const STAR_DDL: &str = "
CREATE TABLE department (id INTEGER PRIMARY KEY, name TEXT);
CREATE TABLE category (id INTEGER PRIMARY KEY, name TEXT, department_id INTEGER REFERENCES department(id));
CREATE TABLE product (id INTEGER PRIMARY KEY, name TEXT, price REAL, category_id INTEGER REFERENCES category(id));
CREATE TABLE date_dim (id INTEGER PRIMARY KEY, day INTEGER, month INTEGER, year INTEGER);
CREATE TABLE customer (id INTEGER PRIMARY KEY, name TEXT, city TEXT);
CREATE TABLE employee (id INTEGER PRIMARY KEY, name TEXT, store_id INTEGER REFERENCES store(id));
CREATE TABLE store (id INTEGER PRIMARY KEY, city TEXT, manager_id INTEGER REFERENCES employee(id));
CREATE TABLE sales (
  id INTEGER PRIMARY KEY,
  product_id INTEGER REFERENCES product(id),
  store_id INTEGER REFERENCES store(id),
  customer_id INTEGER REFERENCES customer(id),
  date_id INTEGER REFERENCES date_dim(id),
  qty INTEGER,
  amount REAL
);";

fn complexity_table() -> Outcome {
    let db = ingest_ddl("star", STAR_DDL).map_err(|e| e.to_string())?;
    // Worked by hand: NA attributes, RD outgoing keys, DRT longest simple
    // outgoing chain. sales → product → category → department is the
    // three-deep chain; store and employee point at each other.
    let expected: BTreeMap<&str, (usize, usize, usize, usize)> = BTreeMap::from([
        ("department", (2, 0, 0, 2)),
        ("category", (3, 1, 1, 6)),
        ("product", (4, 1, 2, 8)),
        ("date_dim", (4, 0, 0, 4)),
        ("customer", (3, 0, 0, 3)),
        ("employee", (3, 1, 1, 6)),
        ("store", (3, 1, 1, 6)),
        ("sales", (7, 4, 3, 18)),
    ]);
    let profiles = profile_all(&db, &BTreeMap::new());
    ensure!(profiles.len() == 8, "{} tables", profiles.len());
    for p in &profiles {
        let want = expected[p.table.as_str()];
        ensure!((p.na, p.rd, p.drt, p.complexity) == want, "{}: got {:?}, want {want:?}", p.table, (p.na, p.rd, p.drt, p.complexity));
    }
    ensure!(drt(&db, "sales") == 3, "chain depth");
    Ok("8 tables match, sales = 18".into())
}

/// State shared by the end-to-end criteria.
struct Run {
    dir: tempfile::TempDir,
    db: sqlforge::schema::DatabaseSchema,
    cfg: RunConfig,
    export: String,
    rounds: u32,
}

fn end_to_end(shared: &mut Option<Run>) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let db = toy_db(dir.path());
    let base = RunConfig { target_query_count: 500, ..RunConfig::default() };
    let fixture = record_fixture(&base, ToyMode::Diverse, &db, dir.path());
    let cfg = scripted(&base, &fixture);

    let mut exports = Vec::new();
    let mut slowest = Duration::ZERO;
    let mut report = None;
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let start = Instant::now();
        let r = synthesize(&cfg, &db, &out.join("pool.db"), &out, false).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        ensure!(r.stop_reason == StopReason::Target && r.final_pool_size >= 500, "run {name}: {:?} at {}", r.stop_reason, r.final_pool_size);
        exports.push(pool_in(&out).to_jsonl());
        report = Some(r);
    }
    let report = report.unwrap();
    ensure!(slowest < Duration::from_secs(120), "slowest run {slowest:?}");
    ensure!(exports[0] == exports[1], "reruns differ");

    let pool = pool_in(&dir.path().join("a"));
    let harness = SqliteHarness::with_defaults(db.data_path.as_deref().unwrap()).unwrap();
    let mut texts = HashSet::new();
    for r in pool.records() {
        let v = harness.check(&r.sql).map_err(|e| e.to_string())?;
        ensure!(v.executable, "record {} fails on re-execution", r.id);
        ensure!(texts.insert(r.normalized_text.clone()), "record {} duplicates an earlier one", r.id);
    }
    let theta = cfg.critic.theta_sim;
    let w = cfg.critic.weights;
    let mut exp = 0;
    for r in pool.records().filter(|r| r.origin == Origin::Exp) {
        exp += 1;
        let fp = pool.fingerprint(r.id).unwrap();
        let worst = pool
            .records()
            .take_while(|o| o.id < r.id)
            .map(|o| hybrid(fp, pool.fingerprint(o.id).unwrap(), &w).unwrap().combined)
            .fold(0.0, f64::max);
        let recorded = r.max_neighbor_sim.ok_or(format!("record {} has no recorded similarity", r.id))?;
        ensure!(recorded < theta && worst < theta, "record {}: recorded {recorded}, full scan {worst}", r.id);
    }
    ensure!(report.alternations >= 2, "{} alternations", report.alternations);
    let summary = format!(
        "{} queries ({} EXP) in {} rounds, {} alternations, slowest run {:.1}s",
        pool.len(),
        exp,
        report.rounds,
        report.alternations,
        slowest.as_secs_f64()
    );
    *shared = Some(Run { export: exports.remove(0), rounds: report.rounds, dir, db, cfg });
    Ok(summary)
}

fn retrieval() -> Outcome {
    const N: usize = 10_000;
    const K: usize = 10;
    let m = K * CANDIDATE_MULTIPLIER;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut pool = SqlPool::in_memory(sqlforge::llm::FALLBACK_DIM).unwrap();
    while pool.len() < N {
        let batch: Vec<NewQuery> = (0..(N - pool.len()).min(2000))
            .map(|_| {
                let sql = synthetic_query(&mut rng);
                NewQuery {
                    analyzed: analyze(&sql).unwrap(),
                    origin: Origin::Gen,
                    round: 0,
                    executable: true,
                    empty_result: false,
                    max_neighbor_sim: None,
                    embedding: fallback_encode(&sql).unwrap(),
                }
            })
            .collect();
        pool.insert_batch(batch);
    }
    let w = HybridWeights::default();
    let ids: Vec<i64> = pool.records().map(|r| r.id).collect();
    let unit = |v: &[f64]| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let stored: Vec<Vec<f64>> = ids.iter().map(|&id| unit(&pool.fingerprint(id).unwrap().embedding)).collect();

    let probes: Vec<QueryFingerprint> = (0..100)
        .map(|i| if i % 4 == 0 { pool.fingerprint(ids[i * 97]).unwrap().clone() } else { fingerprint(&synthetic_query(&mut rng)) })
        .collect();
    let mut exact_sets = Vec::new();
    let mut unrestricted_overlap = 0;
    for (p, q) in probes.iter().enumerate() {
        // Brute force: cosine against every record, keep the best m, hybrid
        // on those, keep the best k.
        let qu = unit(&q.embedding);
        let mut cos: Vec<(i64, f64)> =
            ids.iter().zip(&stored).map(|(&id, v)| (id, v.iter().zip(&qu).map(|(a, b)| a * b).sum())).collect();
        cos.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut scored: Vec<(i64, f64)> =
            cos[..m].iter().map(|&(id, _)| (id, hybrid(q, pool.fingerprint(id).unwrap(), &w).unwrap().combined)).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let want: Vec<i64> = scored[..K].iter().map(|s| s.0).collect();
        let got: Vec<i64> = pool.top_k_hybrid(q, K, &w).into_iter().map(|s| s.0).collect();
        ensure!(got == want, "probe {p}: {got:?} vs {want:?}");
        if p < 10 {
            // For information: the same ranking without the cosine shortlist.
            let mut all: Vec<(i64, f64)> =
                ids.iter().map(|&id| (id, hybrid(q, pool.fingerprint(id).unwrap(), &w).unwrap().combined)).collect();
            all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let full: HashSet<i64> = all[..K].iter().map(|s| s.0).collect();
            unrestricted_overlap += want.iter().filter(|id| full.contains(id)).count();
        }
        exact_sets.push(want);
    }
    pool.set_retrieval_mode(RetrievalMode::Ivf { nlist: 100, nprobe: 16 });
    let mut hits = 0;
    for (q, want) in probes.iter().zip(&exact_sets) {
        let got: HashSet<i64> = pool.top_k_hybrid(q, K, &w).into_iter().map(|s| s.0).collect();
        hits += want.iter().filter(|id| got.contains(id)).count();
    }
    let recall = hits as f64 / (K * probes.len()) as f64;
    ensure!(recall >= 0.95, "IVF recall@10 {recall}");
    Ok(format!(
        "exact scan matches brute force on 100 probes; IVF recall@10 {recall:.3}; unshortlisted top-10 overlap {}/100",
        unrestricted_overlap
    ))
}

fn saturation() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let db = toy_db(dir.path());
    let mut cfg = RunConfig { target_query_count: 500, gen_batch: 2, exp_batch: 40, ..RunConfig::default() };
    cfg.backend.toy_mode = ToyMode::Saturating;
    let limit = cfg.schedule.warmup + cfg.schedule.gen_cycles + cfg.stop.trend_rounds as u32;
    let out = dir.path().join("sat");
    let r = synthesize(&cfg, &db, &out.join("pool.db"), &out, false).map_err(|e| e.to_string())?;
    ensure!(r.stop_reason == StopReason::Saturation, "saturating fixture stopped by {:?} after {} rounds", r.stop_reason, r.rounds);
    ensure!(r.rounds <= limit, "saturation after {} rounds, limit {limit}", r.rounds);

    cfg.backend.toy_mode = ToyMode::Diverse;
    cfg.target_query_count = 300;
    let out = dir.path().join("div");
    let d = synthesize(&cfg, &db, &out.join("pool.db"), &out, false).map_err(|e| e.to_string())?;
    ensure!(d.stop_reason == StopReason::Target && d.final_pool_size >= 300, "diverse fixture stopped by {:?} at {}", d.stop_reason, d.final_pool_size);
    Ok(format!("saturated after {} rounds (limit {limit}); diverse run reached {} in {} rounds", r.rounds, d.final_pool_size, d.rounds))
}

fn crash_resume(shared: &Option<Run>) -> Outcome {
    let run = shared.as_ref().ok_or("needs the end-to-end run")?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let random_round = rng.random_range(1..run.rounds.saturating_sub(1).max(2));
    let mut checked = Vec::new();
    for crash in [5, random_round] {
        let out: PathBuf = run.dir.path().join(format!("crash{crash}"));
        {
            let gw = run.cfg.build_gateway().map_err(|e| e.to_string())?;
            let mut pool = pool_in(&out);
            match run_with(&run.cfg, &run.db, &gw, &mut pool, &out, RunHooks { crash_at_round: Some(crash) }) {
                Err(OrchestratorError::Injected { round }) if round == crash => {}
                other => return Err(format!("crash at {crash} gave {:?}", other.map(|r| r.rounds))),
            }
        }
        let gw = run.cfg.build_gateway().map_err(|e| e.to_string())?;
        let mut pool = pool_in(&out);
        resume_with(&run.cfg, &run.db, &gw, &mut pool, &out).map_err(|e| e.to_string())?;
        ensure!(pool.to_jsonl() == run.export, "resumed pool after crash at round {crash} differs");
        checked.push(crash);
    }
    Ok(format!("crashes at rounds {checked:?} resume to the identical pool"))
}

fn report_fidelity() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let db = toy_db(dir.path());
    let queries = [
        "SELECT id, name FROM customers",
        "SELECT COUNT(*) FROM orders WHERE total > 100",
        "SELECT o.id FROM orders o JOIN customers c ON o.customer_id = c.id WHERE c.segment = 'retail' AND o.total < 0",
        "SELECT name FROM products WHERE id IN (SELECT product_id FROM order_items WHERE quantity > 2)",
        "SELECT region_id, AVG(credit_limit), MAX(credit_limit) FROM customers GROUP BY region_id HAVING COUNT(*) > 1",
        "SELECT * FROM payments WHERE amount < 0 OR method = 'none'",
        "SELECT p.name, SUM(oi.quantity) FROM order_items oi JOIN products p ON oi.product_id = p.id JOIN orders o ON oi.order_id = o.id GROUP BY p.name",
        "SELECT name FROM customers WHERE id IN (SELECT customer_id FROM orders WHERE id IN (SELECT order_id FROM payments WHERE amount > 50))",
        "SELECT missing_column FROM orders",
        "SELECT status, COUNT(*) FROM orders WHERE order_date >= '2024-01-01' AND status <> 'x' GROUP BY status ORDER BY 2 DESC LIMIT 3",
    ];
    let mut corpus = Corpus::from_sql_text(&queries.join(";\n"), "hand");
    ensure!(corpus.len() == 10, "{} parsed", corpus.len());
    let harness = SqliteHarness::with_defaults(db.data_path.as_deref().unwrap()).unwrap();
    corpus.execute(&harness, 1);
    let r = workload_report(&corpus, Some(&db), &FallbackEncoder, &ReportOptions::default()).map_err(|e| e.to_string())?;

    // Counted by hand from the text above.
    let h = |pairs: &[(usize, usize)], width| Histogram { bin_width: width, bins: pairs.iter().copied().collect() };
    let expected = [
        ("join_count", &r.join_count, h(&[(0, 8), (1, 1), (2, 1)], 1)),
        ("predicate_count", &r.predicate_count, h(&[(0, 2), (1, 2), (2, 4), (3, 2)], 1)),
        ("nesting_depth", &r.nesting_depth, h(&[(0, 8), (1, 1), (2, 1)], 1)),
        ("aggregate_count", &r.aggregate_count, h(&[(0, 6), (1, 3), (3, 1)], 1)),
        ("token_length", &r.token_length, h(&[(0, 2), (10, 3), (20, 3), (30, 1), (40, 1)], 10)),
    ];
    for (name, got, want) in expected {
        ensure!(*got == want, "{name}: got {:?}, want {:?}", got.bins, want.bins);
    }
    let per_table: BTreeMap<&str, usize> = r.per_table.iter().map(|t| (t.table.as_str(), t.queries)).collect();
    let want_tables =
        BTreeMap::from([("customers", 4), ("order_items", 2), ("orders", 6), ("payments", 2), ("products", 2), ("region", 0)]);
    ensure!(per_table == want_tables, "per-table counts {per_table:?}");

    // The harness's own verdicts, one query at a time.
    let verdicts: Vec<_> = queries.iter().map(|q| harness.check(q).unwrap()).collect();
    let executable = verdicts.iter().filter(|v| v.executable).count();
    let empty = verdicts.iter().filter(|v| v.executable && v.empty_result).count();
    ensure!(executable == 9 && !verdicts[8].executable, "{executable} executable");
    ensure!(verdicts[2].empty_result && verdicts[5].empty_result, "the impossible filters returned rows");
    let want_empty = empty as f64 / executable as f64;
    ensure!(r.empty_result_fraction == Some(want_empty), "empty fraction {:?}, harness {want_empty}", r.empty_result_fraction);
    ensure!(r.executable_fraction == Some(0.9), "executable fraction {:?}", r.executable_fraction);
    Ok(format!("histograms exact, empty fraction {empty}/{executable}"))
}

fn main() {
    let mut shared = None;
    let criteria: Vec<(&str, Box<dyn FnMut(&mut Option<Run>) -> Outcome>)> = vec![
        ("1 metric exactness", Box::new(|_| metric_exactness())),
        ("2 AST similarity oracle", Box::new(|_| ast_oracle())),
        ("3 Vendi analytic cases", Box::new(|_| vendi_cases())),
        ("4 table complexity", Box::new(|_| complexity_table())),
        ("5 deterministic end-to-end", Box::new(end_to_end)),
        ("6 retrieval correctness", Box::new(|_| retrieval())),
        ("7 saturation stop", Box::new(|_| saturation())),
        ("8 crash-resume equivalence", Box::new(|s| crash_resume(s))),
        ("9 workload report fidelity", Box::new(|_| report_fidelity())),
    ];
    let mut failed = 0;
    for (name, mut check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| check(&mut shared)))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail}) [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({why}) [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
