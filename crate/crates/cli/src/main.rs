use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sqlforge::exec::SqliteHarness;
use sqlforge::llm::FallbackEncoder;
use sqlforge::orchestrator::{synthesize, OrchestratorError, RunConfig};
use sqlforge::pool::{ExportFormat, PoolError, SqlPool};
use sqlforge::report::{
    corpus_vendi, fingerprints, pairwise_similarity_summary, workload_report, Corpus, ReportError, ReportOptions,
};
use sqlforge::schema::{profile_all, DatabaseSchema, SchemaError};
use sqlforge::toy::build_toy_database;

/// Exit codes, one per error family. Clap itself exits with 2 on bad usage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Other = 1,
    Config = 3,
    Pool = 4,
    Schema = 5,
    Corpus = 6,
    Io = 7,
    Resume = 8,
    Backend = 9,
}

struct Failure {
    family: Family,
    error: anyhow::Error,
}

impl Failure {
    fn new(family: Family, error: impl Into<anyhow::Error>) -> Self {
        Failure { family, error: error.into() }
    }
}

impl From<OrchestratorError> for Failure {
    fn from(e: OrchestratorError) -> Self {
        let family = match &e {
            OrchestratorError::Config(_) => Family::Config,
            OrchestratorError::Io { .. } => Family::Io,
            OrchestratorError::Checkpoint(_) | OrchestratorError::ResumeRefused(_) => Family::Resume,
            OrchestratorError::Pool(_) => Family::Pool,
            OrchestratorError::Schema(_) => Family::Schema,
            OrchestratorError::Agent(_) | OrchestratorError::Harness(_) => Family::Backend,
            OrchestratorError::Injected { .. } => Family::Other,
        };
        Failure::new(family, e)
    }
}

impl From<PoolError> for Failure {
    fn from(e: PoolError) -> Self {
        Failure::new(Family::Pool, e)
    }
}

impl From<SchemaError> for Failure {
    fn from(e: SchemaError) -> Self {
        Failure::new(Family::Schema, e)
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        let family = match e {
            ReportError::Io(_) => Family::Io,
            _ => Family::Corpus,
        };
        Failure::new(family, e)
    }
}

type Result<T> = std::result::Result<T, Failure>;

#[derive(Parser)]
#[command(name = "sqlforge", version, about = "Synthesize and analyze SQL query workloads")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the configuration and database, and create an empty pool.
    Init(InitArgs),
    /// Run the generation loop until the target, saturation or the budget.
    Synthesize(SynthesizeArgs),
    /// Workload statistics for a pool or a directory/file of SQL.
    Report(ReportArgs),
    /// Mean pairwise hybrid similarity and Vendi score of a corpus.
    EvalDiversity(DiversityArgs),
    /// Write a pool as jsonl, csv or a SQL file.
    Export(ExportArgs),
}

#[derive(Args)]
struct InitArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    /// Build the bundled 6-table demo database here first. When the
    /// configuration file does not exist yet, a default one using it is written.
    #[arg(long)]
    toy_db: Option<PathBuf>,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    /// Directory for the checkpoint, logs and run report.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Continue from the checkpoint in --out.
    #[arg(long)]
    resume: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct Source {
    #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
    pool: Option<PathBuf>,
    /// A .sql/.jsonl file or a directory of them.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    source: Source,
    /// Supplies the schema for per-table complexity and the database for --execute.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Execute corpus queries against the configured database for the empty-result share.
    #[arg(long, requires = "config")]
    execute: bool,
    /// Directory for report files; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: ReportFormat,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sample_pairs: Option<usize>,
    /// Skip the pairwise similarity and Vendi score.
    #[arg(long)]
    no_diversity: bool,
}

#[derive(Args)]
struct DiversityArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sample_pairs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: ReportFormat,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    pool: PathBuf,
    /// jsonl, csv or sql.
    #[arg(long)]
    format: ExportFormat,
    /// Destination file.
    #[arg(long)]
    out: PathBuf,
}

fn load_config(path: &Path) -> Result<RunConfig> {
    if !path.is_file() {
        return Err(Failure::new(Family::Config, anyhow!("configuration {} not found", path.display())));
    }
    Ok(RunConfig::load(path)?)
}

fn open_existing_pool(path: &Path) -> Result<SqlPool> {
    if !path.is_file() {
        return Err(Failure::new(Family::Pool, anyhow!("pool {} not found", path.display())));
    }
    Ok(SqlPool::open(path, sqlforge::llm::FALLBACK_DIM)?)
}

fn load_source(source: &Source) -> Result<Corpus> {
    match (&source.pool, &source.corpus) {
        (Some(p), _) => Ok(Corpus::from_pool(&open_existing_pool(p)?)),
        (None, Some(c)) => Ok(Corpus::load(c)?),
        (None, None) => unreachable!("clap requires one source"),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display())).map_err(|e| Failure::new(Family::Io, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(|e| Failure::new(Family::Io, e))
}

fn init(args: &InitArgs) -> Result<serde_json::Value> {
    if let Some(toy) = &args.toy_db {
        build_toy_database(toy, 7)?;
        if !args.config.exists() {
            let mut cfg = RunConfig::default();
            cfg.database.path = Some(std::path::absolute(toy).map_err(|e| Failure::new(Family::Io, e))?);
            write_text(&args.config, &cfg.to_toml())?;
        }
    }
    let cfg = load_config(&args.config)?;
    let db = cfg.load_database()?;
    let pool = SqlPool::open(&args.pool, sqlforge::llm::FALLBACK_DIM)?;
    let profiles = profile_all(&db, &pool.stats_per_table(&db.table_names()));
    Ok(serde_json::json!({
        "database": db.name,
        "tables": profiles,
        "pool": args.pool,
        "pool_size": pool.len(),
        "config_digest": cfg.digest(),
    }))
}

fn run_synthesis(args: &SynthesizeArgs) -> Result<serde_json::Value> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let db: DatabaseSchema = cfg.load_database()?;
    if let Some(dir) = args.pool.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let report = synthesize(&cfg, &db, &args.pool, &args.out, args.resume)?;
    Ok(serde_json::to_value(report).expect("report serializes"))
}

fn report(args: &ReportArgs) -> Result<Option<serde_json::Value>> {
    let mut corpus = load_source(&args.source)?;
    let cfg = args.config.as_deref().map(load_config).transpose()?;
    let db = cfg.as_ref().map(RunConfig::load_database).transpose()?;
    if args.execute {
        let db = db.as_ref().expect("clap requires --config with --execute");
        let cfg = cfg.as_ref().expect("clap requires --config with --execute");
        let data = db.data_path.as_deref().expect("loaded from a file");
        let harness = SqliteHarness::new(data, cfg.exec_timeout(), cfg.exec.row_cap)
            .map_err(|e| Failure::new(Family::Schema, e))?;
        corpus.execute(&harness, cfg.critic.parallelism);
    }
    let opts = ReportOptions {
        diversity: !args.no_diversity,
        sample_pairs: args.sample_pairs,
        seed: args.seed,
        weights: cfg.as_ref().map(|c| c.critic.weights).unwrap_or_default(),
        ..ReportOptions::default()
    };
    let r = workload_report(&corpus, db.as_ref(), &FallbackEncoder, &opts)?;
    let mut histograms = Vec::new();
    r.write_histograms_csv(&mut histograms).map_err(|e| Failure::new(Family::Io, e))?;
    let mut tables = Vec::new();
    r.write_tables_csv(&mut tables).map_err(|e| Failure::new(Family::Io, e))?;
    let (histograms, tables) = (String::from_utf8_lossy(&histograms), String::from_utf8_lossy(&tables));
    match (&args.out, args.format) {
        (Some(dir), _) => {
            create_dir(dir)?;
            write_text(&dir.join("report.json"), &(r.to_json() + "\n"))?;
            write_text(&dir.join("histograms.csv"), &histograms)?;
            write_text(&dir.join("tables.csv"), &tables)?;
            Ok(Some(serde_json::json!({ "out": dir, "corpus_size": r.corpus_size, "unparseable": r.unparseable })))
        }
        (None, ReportFormat::Json) => Ok(Some(serde_json::to_value(&r).expect("report serializes"))),
        (None, ReportFormat::Csv) => {
            print!("{histograms}\n{tables}");
            Ok(None)
        }
    }
}

fn eval_diversity(args: &DiversityArgs) -> Result<Option<serde_json::Value>> {
    let corpus = load_source(&args.source)?;
    let fps = fingerprints(&corpus, &FallbackEncoder)?;
    let summary = pairwise_similarity_summary(&fps, &Default::default(), args.sample_pairs, args.seed)?;
    let vendi = corpus_vendi(&fps)?;
    let value = serde_json::json!({
        "corpus_size": corpus.len(),
        "unparseable": corpus.unparseable.len(),
        "hybrid_similarity": summary,
        "vendi_score": vendi,
    });
    let text = match args.format {
        ReportFormat::Json => serde_json::to_string_pretty(&value).expect("json") + "\n",
        ReportFormat::Csv => format!(
            "corpus_size,unparseable,method,pairs,mean_hybrid_similarity,vendi_score\n{},{},{},{},{},{}\n",
            corpus.len(),
            corpus.unparseable.len(),
            value["hybrid_similarity"]["method"].as_str().unwrap_or_default(),
            summary.pairs,
            summary.mean,
            vendi
        ),
    };
    match &args.out {
        Some(path) => {
            write_text(path, &text)?;
            Ok(None)
        }
        None => {
            print!("{text}");
            Ok(None)
        }
    }
}

fn export(args: &ExportArgs) -> Result<serde_json::Value> {
    let pool = open_existing_pool(&args.pool)?;
    let files = pool.export(args.format, &args.out)?;
    Ok(serde_json::json!({ "records": pool.len(), "files": files, "out": args.out }))
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Init(a) => init(a).map(Some),
        Command::Synthesize(a) => run_synthesis(a).map(Some),
        Command::Report(a) => report(a),
        Command::EvalDiversity(a) => eval_diversity(a),
        Command::Export(a) => export(a).map(Some),
    };
    match outcome {
        Ok(Some(v)) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.family as u8)
        }
    }
}
