use std::path::Path;
use std::process::{Command, Output};

fn sqlforge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqlforge")).current_dir(dir).args(args).output().unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn init_synthesize_export_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let init = json(&sqlforge(d, &["init", "--config", "run.toml", "--pool", "pool.db", "--toy-db", "toy.db"]));
    assert_eq!(init["tables"].as_array().unwrap().len(), 6);
    assert_eq!(init["pool_size"], 0);

    let cfg = std::fs::read_to_string(d.join("run.toml")).unwrap();
    let cfg = cfg.replace("target_query_count = 1000", "target_query_count = 60");
    std::fs::write(d.join("run.toml"), cfg).unwrap();
    let run = json(&sqlforge(d, &["synthesize", "--config", "run.toml", "--pool", "pool.db", "--out", "out"]));
    assert_eq!(run["stop_reason"], "target");
    let size = run["final_pool_size"].as_u64().unwrap();
    assert!(size >= 60);
    for f in ["checkpoint.json", "decisions.jsonl", "transcript.jsonl", "run_report.json", "run_series.csv"] {
        assert!(d.join("out").join(f).is_file(), "{f}");
    }

    json(&sqlforge(d, &["export", "--pool", "pool.db", "--format", "jsonl", "--out", "pool.jsonl"]));
    let lines = std::fs::read_to_string(d.join("pool.jsonl")).unwrap();
    assert_eq!(lines.lines().count() as u64, size);

    // Per-table counts agree between the pool and its export.
    let from_pool = json(&sqlforge(d, &["report", "--pool", "pool.db", "--config", "run.toml", "--no-diversity"]));
    let from_file = json(&sqlforge(d, &["report", "--corpus", "pool.jsonl", "--config", "run.toml", "--no-diversity"]));
    assert_eq!(from_pool["corpus_size"].as_u64(), Some(size));
    assert_eq!(from_pool["per_table"], from_file["per_table"]);
    assert_eq!(from_pool["join_count"], from_file["join_count"]);
    assert_eq!(from_pool["empty_result_fraction"].as_f64().is_some(), true);

    let out = sqlforge(d, &["report", "--pool", "pool.db", "--format", "csv", "--no-diversity"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("metric,bin,count\n"));
}

#[test]
fn diversity_of_repeated_query() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("same.sql"), "SELECT a FROM t WHERE b > 1;\n".repeat(5)).unwrap();
    let v = json(&sqlforge(d, &["eval-diversity", "--corpus", "same.sql"]));
    assert_eq!(v["hybrid_similarity"]["mean"], 1.0);
    assert_eq!(v["hybrid_similarity"]["method"], "exact");
    assert!((v["vendi_score"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn report_counts_unparseable_entries() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("c.sql"),
        "SELECT a FROM t;\nSELECT t.a FROM t JOIN u ON t.id = u.id WHERE u.x = 1;\nnot sql at all;\nSELECT COUNT(*) FROM u GROUP BY y;",
    )
    .unwrap();
    let v = json(&sqlforge(d, &["report", "--corpus", "c.sql", "--out", "rep"]));
    assert_eq!((v["corpus_size"].as_u64(), v["unparseable"].as_u64()), (Some(3), Some(1)));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("rep/report.json")).unwrap()).unwrap();
    assert_eq!(r["join_count"]["bins"], serde_json::json!({"0": 2, "1": 1}));
    assert_eq!(r["aggregate_count"]["bins"], serde_json::json!({"0": 2, "1": 1}));
    assert_eq!(r["unparseable_entries"][0]["source"], "c.sql:3");
    assert!(d.join("rep/tables.csv").is_file() && d.join("rep/histograms.csv").is_file());
}

#[test]
fn error_families_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = |args: &[&str]| sqlforge(d, args).status.code().unwrap();
    assert_eq!(code(&["report", "--pool", "missing.db"]), 4);
    assert_eq!(code(&["synthesize", "--config", "missing.toml", "--pool", "p.db", "--out", "o"]), 3);
    std::fs::write(d.join("bad.toml"), "target_query_count = \"many\"").unwrap();
    assert_eq!(code(&["init", "--config", "bad.toml", "--pool", "p.db"]), 3);
    std::fs::write(d.join("nodb.toml"), "[database]\npath = \"absent.db\"").unwrap();
    assert_eq!(code(&["init", "--config", "nodb.toml", "--pool", "p.db"]), 5);
    std::fs::write(d.join("one.sql"), "SELECT 1").unwrap();
    assert_eq!(code(&["eval-diversity", "--corpus", "one.sql"]), 6);
    assert_eq!(code(&["export", "--pool", "p.db", "--format", "xml", "--out", "x"]), 2);
    assert_eq!(code(&["report"]), 2);
}
