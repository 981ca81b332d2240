use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::benchmark::database_path;
use super::judge::judge;
use super::metrics::{accuracy, confidence_interval, latency_percentiles, ConfidenceInterval};
use super::{BenchmarkItem, EvalError, ResultCode};
use crate::config::{EngineConfig, Providers};
use crate::orchestrator::{run_session, JsonlTraceWriter, SessionRequest, SessionState, TraceSink};
use crate::proto::{CandidateSql, ResultTable, SessionTrace, SqlOrigin, TraceEvent, TraceHeader};
use crate::retrieval::{build_index, SchemaIndex};
use crate::schema::{enrich_database, load_metadata, save_metadata, DescribeOptions, EnrichedSchema};
use crate::sql::{execute, Database, ExecOptions};

pub const REPORT_FORMAT: &str = "ledgersql.eval-report";
pub const REPORT_VERSION: u32 = 1;

const LEGEND: &str = "turns = SQL-writing calls by the orchestrator or the generator plus query executions; \
accuracy = share of RES3 and RES5 codes in percent";
const PERCENTILES: [f64; 3] = [50.0, 90.0, 95.0];
const CONFIDENCE_LEVEL: f64 = 0.95;

/// Monotonic time source for latency measurement.
pub trait Clock: Send + Sync {
    fn elapsed(&self) -> Duration;
}

pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for SystemClock {
    fn elapsed(&self) -> Duration {
        self.0.elapsed()
    }
}

/// Advances a fixed step on every reading, so each measured span is one
/// step long. Makes reports reproducible byte for byte.
pub struct StepClock {
    step: Duration,
    ticks: AtomicU64,
}

impl StepClock {
    pub fn new(step: Duration) -> Self {
        Self {
            step,
            ticks: AtomicU64::new(0),
        }
    }
}

impl Clock for StepClock {
    fn elapsed(&self) -> Duration {
        let t = self.ticks.fetch_add(1, Ordering::SeqCst);
        self.step * u32::try_from(t).unwrap_or(u32::MAX)
    }
}

type Artifacts = Arc<(EnrichedSchema, SchemaIndex)>;

/// Per-database metadata and index, loaded from `dir` or built and saved
/// there on first use.
pub struct ArtifactStore {
    dir: PathBuf,
    cache: Mutex<HashMap<String, Artifacts>>,
}

impl ArtifactStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn metadata_path(&self, database_id: &str) -> PathBuf {
        self.dir.join(format!("{database_id}.metadata.json"))
    }

    pub fn index_path(&self, database_id: &str) -> PathBuf {
        self.dir.join(format!("{database_id}.index.json"))
    }

    fn get(&self, database_id: &str, db: &Database, config: &EngineConfig, providers: &Providers) -> Result<Artifacts, String> {
        // held across the build so two workers never enrich the same database
        let mut cache = self.cache.lock().expect("artifact cache poisoned");
        if let Some(a) = cache.get(database_id) {
            return Ok(a.clone());
        }
        let (meta, idx) = (self.metadata_path(database_id), self.index_path(database_id));
        let schema = if meta.is_file() {
            load_metadata(&meta).map_err(|e| e.to_string())?
        } else {
            let opts = DescribeOptions {
                model: config.session.orchestrator.clone(),
                parallelism: 1,
            };
            let s = enrich_database(db, database_id, &providers.orchestrator, None, &opts).map_err(|e| e.to_string())?;
            std::fs::create_dir_all(&self.dir).map_err(|e| e.to_string())?;
            save_metadata(&s, &meta).map_err(|e| e.to_string())?;
            s
        };
        let index = match SchemaIndex::load(&idx) {
            Ok(i) if idx.is_file() && i.embedder_id == providers.embedder.id() => i,
            _ => {
                let i = build_index(&schema, providers.embedder.as_ref()).map_err(|e| e.to_string())?;
                std::fs::create_dir_all(&self.dir).map_err(|e| e.to_string())?;
                i.save(&idx).map_err(|e| e.to_string())?;
                i
            }
        };
        let a = Arc::new((schema, index));
        cache.insert(database_id.to_string(), a.clone());
        Ok(a)
    }
}

pub struct EvalOptions {
    /// BIRD layout root holding `dev_databases/`.
    pub root: PathBuf,
    pub artifacts: ArtifactStore,
    /// Existing records here are kept and their items skipped.
    pub report_path: Option<PathBuf>,
    /// Replacement gold queries by item id, with a label for the report.
    pub overlay: Option<(String, BTreeMap<String, String>)>,
    pub trace_dir: Option<PathBuf>,
    pub clock: Arc<dyn Clock>,
}

impl EvalOptions {
    pub fn new(root: impl Into<PathBuf>, artifact_dir: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            artifacts: ArtifactStore::new(artifact_dir),
            report_path: None,
            overlay: None,
            trace_dir: None,
            clock: Arc::new(SystemClock::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub item_id: String,
    /// 1-based.
    pub trial: usize,
    pub database_id: String,
    pub domain: String,
    pub code: ResultCode,
    pub judge_reasoning: String,
    pub latency_ms: u64,
    pub turns: usize,
    pub attempts: usize,
    pub best_effort: bool,
    pub final_sql: Option<String>,
    /// Set when the record reflects an infrastructure failure rather than a
    /// model outcome.
    pub infra_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSummary {
    pub domain: String,
    pub records: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub records: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub format: String,
    pub version: u32,
    pub legend: String,
    pub overlay: Option<String>,
    pub trials: usize,
    pub records: Vec<EvalRecord>,
    pub code_counts: BTreeMap<ResultCode, usize>,
    pub accuracy: Option<f64>,
    pub weighted_accuracy: Option<f64>,
    pub domains: Vec<DomainSummary>,
    /// (rank, seconds) for P50, P90 and P95.
    pub latency_seconds: Vec<(f64, f64)>,
    pub trial_accuracy: Vec<TrialSummary>,
    pub confidence_interval: Option<ConfidenceInterval>,
    pub infra_failures: usize,
}

impl BenchmarkReport {
    /// Recomputes every summary from `records`.
    pub fn from_records(records: Vec<EvalRecord>, trials: usize, overlay: Option<String>) -> Self {
        let codes: Vec<ResultCode> = records.iter().map(|r| r.code).collect();
        let mut code_counts: BTreeMap<ResultCode, usize> = ResultCode::ALL.iter().map(|c| (*c, 0)).collect();
        for c in &codes {
            *code_counts.entry(*c).or_default() += 1;
        }

        let mut by_domain: BTreeMap<&str, Vec<ResultCode>> = BTreeMap::new();
        let mut by_trial: BTreeMap<usize, Vec<ResultCode>> = BTreeMap::new();
        for r in &records {
            by_domain.entry(&r.domain).or_default().push(r.code);
            by_trial.entry(r.trial).or_default().push(r.code);
        }
        let domains: Vec<DomainSummary> = by_domain
            .iter()
            .filter_map(|(d, c)| {
                Some(DomainSummary {
                    domain: d.to_string(),
                    records: c.len(),
                    accuracy: accuracy(c).ok()?,
                })
            })
            .collect();
        let total: usize = domains.iter().map(|d| d.records).sum();
        let weighted_accuracy =
            (total > 0).then(|| domains.iter().map(|d| d.accuracy * d.records as f64).sum::<f64>() / total as f64);
        let trial_accuracy: Vec<TrialSummary> = by_trial
            .iter()
            .filter_map(|(t, c)| {
                Some(TrialSummary {
                    trial: *t,
                    records: c.len(),
                    accuracy: accuracy(c).ok()?,
                })
            })
            .collect();
        let confidence_interval = if trial_accuracy.len() >= 2 {
            let accs: Vec<f64> = trial_accuracy.iter().map(|t| t.accuracy).collect();
            confidence_interval(&accs, CONFIDENCE_LEVEL).ok()
        } else {
            None
        };
        let latencies: Vec<Duration> = records.iter().map(|r| Duration::from_millis(r.latency_ms)).collect();
        let latency_seconds = latency_percentiles(&latencies, &PERCENTILES)
            .map(|v| v.into_iter().map(|(p, d)| (p, d.as_secs_f64())).collect())
            .unwrap_or_default();

        Self {
            format: REPORT_FORMAT.to_string(),
            version: REPORT_VERSION,
            legend: LEGEND.to_string(),
            overlay,
            trials,
            accuracy: accuracy(&codes).ok(),
            infra_failures: records.iter().filter(|r| r.infra_failure.is_some()).count(),
            records,
            code_counts,
            weighted_accuracy,
            domains,
            latency_seconds,
            trial_accuracy,
            confidence_interval,
        }
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path)?;
        let report: Self = serde_json::from_str(&text).map_err(|e| EvalError::MalformedReport(e.to_string()))?;
        if report.format != REPORT_FORMAT || report.version != REPORT_VERSION {
            return Err(EvalError::MalformedReport(format!("unsupported report {}/{}", report.format, report.version)));
        }
        Ok(report)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes the report and, next to it, the rendered summary (`.txt`).
    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(&tmp, path)?;
        std::fs::write(path.with_extension("txt"), render_summary(self))?;
        Ok(())
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "n/a".into())
}

/// Plain-text tables: per-domain accuracy, latency percentiles, trials.
pub fn render_summary(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<28} {:>8} {:>13}", "domain", "records", "accuracy (%)");
    for d in &report.domains {
        let _ = writeln!(out, "{:<28} {:>8} {:>13.2}", d.domain, d.records, d.accuracy);
    }
    let total: usize = report.domains.iter().map(|d| d.records).sum();
    let _ = writeln!(out, "{:<28} {:>8} {:>13}", "weighted average", total, fmt_opt(report.weighted_accuracy));
    out.push('\n');

    let header: Vec<String> = PERCENTILES.iter().map(|p| format!("P{p:.0} Latency (s)")).collect();
    let _ = writeln!(out, "{}", header.iter().map(|h| format!("{h:>16}")).collect::<Vec<_>>().join(" "));
    let values: Vec<String> = PERCENTILES
        .iter()
        .map(|p| {
            let v = report.latency_seconds.iter().find(|(r, _)| r == p).map(|(_, s)| *s);
            format!("{:>16}", v.map(|s| format!("{s:.3}")).unwrap_or_else(|| "n/a".into()))
        })
        .collect();
    let _ = writeln!(out, "{}", values.join(" "));
    out.push('\n');

    let codes: Vec<String> = report.code_counts.iter().map(|(c, n)| format!("{c} {n}")).collect();
    let _ = writeln!(out, "codes: {}", codes.join(", "));
    for t in &report.trial_accuracy {
        let _ = writeln!(out, "trial {}: {:.2}% over {} records", t.trial, t.accuracy, t.records);
    }
    if let Some(ci) = &report.confidence_interval {
        let _ = writeln!(
            out,
            "mean over {} trials: {:.2} ± {:.2} ({:.0}% two-sided t interval)",
            ci.trials,
            ci.mean,
            ci.margin,
            ci.level * 100.0
        );
    }
    if let Some(o) = &report.overlay {
        let _ = writeln!(out, "gold overlay: {o}");
    }
    let _ = writeln!(out, "infrastructure failures: {}", report.infra_failures);
    let _ = writeln!(out, "{}", report.legend);
    out
}

struct Job<'a> {
    position: usize,
    item: &'a BenchmarkItem,
    trial: usize,
}

struct Ctx<'a> {
    config: &'a EngineConfig,
    providers: &'a Providers,
    opts: &'a EvalOptions,
}

fn infra(job: &Job<'_>, message: String) -> EvalRecord {
    EvalRecord {
        item_id: job.item.item_id.clone(),
        trial: job.trial,
        database_id: job.item.database_id.clone(),
        domain: job.item.domain.clone(),
        code: ResultCode::Res6,
        judge_reasoning: message.clone(),
        latency_ms: 0,
        turns: 0,
        attempts: 0,
        best_effort: false,
        final_sql: None,
        infra_failure: Some(message),
    }
}

/// The text handed to the judge when the session produced no table.
fn generated_error(state: &SessionState) -> String {
    let chosen = state
        .outcome
        .as_ref()
        .and_then(|o| o.chosen_attempt)
        .and_then(|i| state.attempts.iter().find(|a| a.index == i))
        .or(state.attempts.last());
    chosen
        .and_then(|a| a.execution.error_message().map(str::to_string).or_else(|| a.rejection_reason.clone()))
        .unwrap_or_else(|| "no query was produced".to_string())
}

enum Sink {
    Memory(SessionTrace),
    File(JsonlTraceWriter<std::io::BufWriter<std::fs::File>>),
}

impl TraceSink for Sink {
    fn header(&mut self, header: &TraceHeader) -> std::io::Result<()> {
        match self {
            Sink::Memory(t) => t.header(header),
            Sink::File(w) => w.header(header),
        }
    }

    fn event(&mut self, event: &TraceEvent) -> std::io::Result<()> {
        match self {
            Sink::Memory(t) => t.event(event),
            Sink::File(w) => w.event(event),
        }
    }
}

fn evaluate(job: &Job<'_>, ctx: &Ctx<'_>) -> EvalRecord {
    let item = job.item;
    let path = database_path(&ctx.opts.root, &item.database_id);
    let db = match Database::open_read_only(&path) {
        Ok(db) => db,
        Err(e) => return infra(job, format!("cannot open database: {}", e.message)),
    };
    let artifacts = match ctx.opts.artifacts.get(&item.database_id, &db, ctx.config, ctx.providers) {
        Ok(a) => a,
        Err(e) => return infra(job, format!("cannot prepare schema artifacts: {e}")),
    };
    let (schema, index) = (&artifacts.0, &artifacts.1);

    let gold_sql = ctx
        .opts
        .overlay
        .as_ref()
        .and_then(|(_, m)| m.get(&item.item_id))
        .unwrap_or(&item.gold_sql);
    let gold_candidate = CandidateSql {
        sql_text: gold_sql.clone(),
        dialect: ctx.config.session.dialect.clone(),
        origin: SqlOrigin::Generator,
    };
    let session_cfg = &ctx.config.session;
    let gold = match execute(&db, &gold_candidate, &ExecOptions::new(session_cfg.final_row_cap, session_cfg.statement_timeout())) {
        Ok(t) => t,
        Err(e) => return infra(job, format!("gold query failed: {}", e.message)),
    };

    let trace_id = format!("bench-{}-t{}", item.item_id, job.trial);
    let mut sink = match &ctx.opts.trace_dir {
        Some(dir) => match std::fs::create_dir_all(dir).and_then(|_| std::fs::File::create(dir.join(format!("{trace_id}.jsonl")))) {
            Ok(f) => Sink::File(JsonlTraceWriter::new(std::io::BufWriter::new(f))),
            Err(e) => return infra(job, format!("cannot create trace file: {e}")),
        },
        None => Sink::Memory(SessionTrace {
            header: TraceHeader::new(&trace_id, &item.database_id, &item.question),
            events: Vec::new(),
        }),
    };
    let request = SessionRequest {
        question: item.question.clone(),
        business_rules: item.evidence.iter().cloned().collect(),
        few_shot: Vec::new(),
        trace_id: Some(trace_id),
    };
    let start = ctx.opts.clock.elapsed();
    let result = run_session(&request, schema, index, session_cfg, ctx.providers, &db, &mut sink);
    let latency = ctx.opts.clock.elapsed().saturating_sub(start);

    let state = match result {
        Ok(state) => state,
        Err(e) => {
            let mut r = infra(job, format!("engine failure: {e}"));
            if let Some(p) = e.partial() {
                r.turns = p.turns;
                r.attempts = p.attempts.len();
            }
            r.latency_ms = latency.as_millis() as u64;
            return r;
        }
    };
    let outcome = state.outcome.as_ref();
    let error_text = generated_error(&state);
    let generated: Result<&ResultTable, &str> = match outcome.and_then(|o| o.result.as_ref()) {
        Some(t) => Ok(t),
        None => Err(&error_text),
    };
    let mut record = EvalRecord {
        item_id: item.item_id.clone(),
        trial: job.trial,
        database_id: item.database_id.clone(),
        domain: item.domain.clone(),
        code: ResultCode::Res6,
        judge_reasoning: String::new(),
        latency_ms: latency.as_millis() as u64,
        turns: state.turns,
        attempts: state.attempts.len(),
        best_effort: outcome.is_some_and(|o| o.best_effort),
        final_sql: outcome.and_then(|o| o.final_sql.clone()),
        infra_failure: None,
    };
    match judge(&gold, generated, &ctx.providers.judge, &ctx.config.eval.judge, ctx.config.eval.render_cap_chars) {
        Ok(j) => {
            record.code = j.code;
            record.judge_reasoning = j.reasoning;
        }
        Err(e) => {
            record.judge_reasoning = format!("judge failure: {e}");
            record.infra_failure = Some(record.judge_reasoning.clone());
        }
    }
    record
}

/// Evaluates every (item, trial) pair not already present in the report at
/// `opts.report_path`, persisting the report after each record. Item-level
/// failures become RES6 records flagged `infra_failure`; the run never aborts
/// on them.
pub fn run_benchmark(
    items: &[BenchmarkItem],
    config: &EngineConfig,
    providers: &Providers,
    trials: usize,
    opts: &EvalOptions,
) -> Result<BenchmarkReport, EvalError> {
    let trials = trials.max(1);
    let mut config = config.clone();
    if trials > 1 {
        config.session.orchestrator.temperature = config.eval.trial_temperature;
        config.session.generator.temperature = config.eval.trial_temperature;
    }
    let overlay_label = opts.overlay.as_ref().map(|(l, _)| l.clone());

    let mut records: Vec<EvalRecord> = match &opts.report_path {
        Some(p) if p.is_file() => BenchmarkReport::load(p)?.records,
        _ => Vec::new(),
    };
    let done: HashSet<(String, usize)> = records.iter().map(|r| (r.item_id.clone(), r.trial)).collect();
    let jobs: Vec<Job<'_>> = (1..=trials)
        .flat_map(|trial| items.iter().enumerate().map(move |(position, item)| Job { position, item, trial }))
        .filter(|j| !done.contains(&(j.item.item_id.clone(), j.trial)))
        .collect();
    if !done.is_empty() {
        tracing::info!(skipped = done.len(), remaining = jobs.len(), "resuming benchmark report");
    }

    let position: HashMap<&str, usize> = items.iter().enumerate().map(|(i, it)| (it.item_id.as_str(), i)).collect();
    let sort = |records: &mut Vec<EvalRecord>| {
        records.sort_by(|a, b| {
            let pa = position.get(a.item_id.as_str()).copied().unwrap_or(usize::MAX);
            let pb = position.get(b.item_id.as_str()).copied().unwrap_or(usize::MAX);
            (a.trial, pa, &a.item_id).cmp(&(b.trial, pb, &b.item_id))
        })
    };

    let ctx = Ctx {
        config: &config,
        providers,
        opts,
    };
    let workers = config.eval.parallelism.max(1).min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, EvalRecord)>();
    let mut write_error: Option<EvalError> = None;
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, next, ctx) = (&jobs, &next, &ctx);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                if tx.send((job.position, evaluate(job, ctx))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (_, record) in rx {
            tracing::info!(item = %record.item_id, trial = record.trial, code = %record.code, "evaluated");
            records.push(record);
            if let (Some(path), None) = (&opts.report_path, &write_error) {
                sort(&mut records);
                let partial = BenchmarkReport::from_records(records.clone(), trials, overlay_label.clone());
                if let Err(e) = partial.save(path) {
                    write_error = Some(e);
                }
            }
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }

    sort(&mut records);
    let report = BenchmarkReport::from_records(records, trials, overlay_label);
    if let Some(path) = &opts.report_path {
        report.save(path)?;
    }
    Ok(report)
}
