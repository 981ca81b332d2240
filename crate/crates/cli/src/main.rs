mod render;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ledgersql_client::{AskRequest, Client};
use ledgersql_core::config::{EngineConfig, Providers};
use ledgersql_core::eval::{load_benchmark, load_overlay, render_summary, run_benchmark, ArtifactStore, EvalOptions};
use ledgersql_core::proto::ConfigOverrides;
use ledgersql_core::retrieval::build_index;
use ledgersql_core::schema::{enrich_database, load_metadata, save_metadata, DescribeOptions};
use ledgersql_core::sql::Database;
use ledgersql_core::tools::ToolServer;
use ledgersql_server::Registry;

/// Natural-language questions over SQLite databases.
///
/// Configuration comes from `--config` (TOML) and `LEDGERSQL_*` environment
/// variables; provider credentials are read from the environment only.
#[derive(Debug, Parser)]
#[command(name = "ledgersql", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "LEDGERSQL_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Profile a database, derive its keys and describe it; writes `<id>.metadata.json`.
    Enrich(EnrichArgs),
    /// Embed the column documents of an enriched database; writes `<id>.index.json`.
    Index(IndexArgs),
    /// Ask a running server a question.
    Ask(AskArgs),
    /// Run a BIRD-layout benchmark and write a report.
    Bench(BenchArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Answer `schema_search` / `sql_execute` requests on stdin, one JSON object per line.
    Tools(ToolsArgs),
}

#[derive(Debug, Args)]
struct EnrichArgs {
    /// SQLite database file.
    database: PathBuf,
    /// Database id; defaults to the file stem.
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Metadata file to write instead of `<data-dir>/<id>.metadata.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Free-text documentation passed to the describing model.
    #[arg(long)]
    docs: Option<PathBuf>,
    /// Tables described concurrently.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
}

#[derive(Debug, Args)]
struct IndexArgs {
    id: String,
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AskArgs {
    /// Database id as listed by the server.
    database: String,
    /// The question; several words are joined with spaces.
    #[arg(required = true, num_args = 1..)]
    question: Vec<String>,
    #[arg(long, env = "LEDGERSQL_SERVER", default_value = "http://127.0.0.1:8080")]
    server: String,
    /// Business rule handed to the planner; repeatable.
    #[arg(long = "rule")]
    rules: Vec<String>,
    #[arg(long)]
    total_budget: Option<usize>,
    #[arg(long)]
    escalation_threshold: Option<usize>,
    #[arg(long)]
    row_limit: Option<u64>,
    /// Print the raw response instead of the rendered summary.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Directory holding `dev.json` and `dev_databases/`.
    root: PathBuf,
    /// Restrict to one database id.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// JSON map from question id to replacement gold SQL.
    #[arg(long)]
    overlay: Option<PathBuf>,
    #[arg(long, default_value = "bench-report.json")]
    report: PathBuf,
    /// Where enrichment artifacts are cached; defaults to the data directory.
    #[arg(long)]
    artifacts: Option<PathBuf>,
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    bind: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    #[arg(long)]
    trace_retention: Option<usize>,
}

#[derive(Debug, Args)]
struct ToolsArgs {
    id: String,
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut config = EngineConfig::load(cli.config.as_deref()).context("loading configuration")?;
    match cli.command {
        Command::Enrich(a) => enrich(&config, a),
        Command::Index(a) => index(&config, a),
        Command::Ask(a) => ask(a),
        Command::Bench(a) => bench(&mut config, a),
        Command::Serve(a) => serve(config, a),
        Command::Tools(a) => tools(&config, a),
    }
}

fn providers(config: &EngineConfig) -> Result<Providers> {
    Providers::from_config(&config.providers).context("configuring providers")
}

fn data_dir<'a>(config: &'a EngineConfig, flag: &'a Option<PathBuf>) -> &'a Path {
    flag.as_deref().unwrap_or(&config.server.data_dir)
}

fn enrich(config: &EngineConfig, a: EnrichArgs) -> Result<ExitCode> {
    let path = a.database.canonicalize().with_context(|| format!("{}", a.database.display()))?;
    let id = match a.id {
        Some(id) => id,
        None => path.file_stem().and_then(|s| s.to_str()).context("database id from file name")?.to_string(),
    };
    let docs = a.docs.as_ref().map(std::fs::read_to_string).transpose().context("reading docs")?;
    let db = Database::open_read_only(&path).map_err(|e| anyhow::anyhow!(e.message))?;
    let opts = DescribeOptions {
        model: config.session.orchestrator.clone(),
        parallelism: a.parallelism.max(1),
    };
    let schema = enrich_database(&db, &id, &providers(config)?.orchestrator, docs.as_deref(), &opts)?;
    let out = match a.out {
        Some(p) => p,
        None => ArtifactStore::new(data_dir(config, &a.data_dir)).metadata_path(&id),
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    save_metadata(&schema, &out)?;
    let keys = schema.keys.foreign_keys.len();
    println!(
        "{id}: {} tables, {} columns, {keys} foreign keys -> {}",
        schema.tables().len(),
        schema.profiles.len(),
        out.display()
    );
    if !schema.descriptions_complete {
        println!("warning: some tables kept statistics-only descriptions");
    }
    Ok(ExitCode::SUCCESS)
}

fn index(config: &EngineConfig, a: IndexArgs) -> Result<ExitCode> {
    let store = ArtifactStore::new(data_dir(config, &a.data_dir));
    let schema = load_metadata(&store.metadata_path(&a.id)).with_context(|| format!("metadata for {}", a.id))?;
    let embedder = providers(config)?.embedder;
    let index = build_index(&schema, embedder.as_ref())?;
    let out = store.index_path(&a.id);
    index.save(&out)?;
    println!("{}: {} documents -> {}", a.id, index.documents.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn ask(a: AskArgs) -> Result<ExitCode> {
    let client = Client::new(&a.server)?;
    let request = AskRequest {
        question: a.question.join(" "),
        business_rules: a.rules,
        few_shot: Vec::new(),
        overrides: ConfigOverrides {
            total_budget: a.total_budget,
            escalation_threshold: a.escalation_threshold,
            row_limit: a.row_limit,
            magnitude_threshold: None,
        },
    };
    let response = runtime()?.block_on(client.ask(&a.database, &request))?;
    let mut out = std::io::stdout().lock();
    if a.json {
        serde_json::to_writer_pretty(&mut out, &response)?;
        writeln!(out)?;
    } else {
        write!(out, "{}", render::ask_summary(&response))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn bench(config: &mut EngineConfig, a: BenchArgs) -> Result<ExitCode> {
    if let Some(p) = a.parallelism {
        config.eval.parallelism = p.max(1);
    }
    let items = load_benchmark(&a.root, a.domain.as_deref())?;
    if items.is_empty() {
        bail!("no benchmark items selected");
    }
    let artifacts = a.artifacts.clone().unwrap_or_else(|| config.server.data_dir.clone());
    let mut opts = EvalOptions::new(a.root.clone(), artifacts);
    opts.report_path = Some(a.report.clone());
    opts.trace_dir = a.trace_dir;
    if let Some(path) = &a.overlay {
        let label = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        opts.overlay = Some((label, load_overlay(path)?));
    }
    let report = run_benchmark(&items, config, &providers(config)?, a.trials, &opts)?;
    print!("{}", render_summary(&report));
    println!("report: {}", a.report.display());
    if report.infra_failures > 0 {
        eprintln!("{} records failed for infrastructure reasons", report.infra_failures);
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(mut config: EngineConfig, a: ServeArgs) -> Result<ExitCode> {
    if let Some(b) = a.bind {
        config.server.bind = b;
    }
    if let Some(d) = a.data_dir {
        config.server.data_dir = d;
    }
    if let Some(d) = a.trace_dir {
        config.server.trace_dir = d;
    }
    if let Some(r) = a.trace_retention {
        config.server.trace_retention = r;
    }
    runtime()?.block_on(ledgersql_server::serve(config))?;
    Ok(ExitCode::SUCCESS)
}

fn tools(config: &EngineConfig, a: ToolsArgs) -> Result<ExitCode> {
    let registry = Registry::load(data_dir(config, &a.data_dir))?;
    let entry = registry.get(&a.id).with_context(|| format!("unknown database {:?}", a.id))?;
    let db = Database::open_read_only(&entry.db_path).map_err(|e| anyhow::anyhow!(e.message))?;
    let embedder = Arc::clone(&providers(config)?.embedder);
    let server = ToolServer {
        index: &entry.index,
        embedder: embedder.as_ref(),
        db: &db,
        dialect: entry.schema.dialect.clone(),
        default_row_limit: config.session.row_limit,
        timeout: config.session.statement_timeout(),
        render_cap_chars: 2000,
    };
    server.serve(std::io::stdin().lock(), std::io::stdout().lock())?;
    Ok(ExitCode::SUCCESS)
}
