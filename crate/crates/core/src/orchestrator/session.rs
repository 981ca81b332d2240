use std::sync::Arc;

use serde_json::json;

use super::{
    compile_fact_sheet, compress_history, decide_action, prune_context, FactSheetError, Feedback, SessionError,
    StepError, TraceSink,
};
use super::compress::outcome_summary;
use crate::config::{Providers, SessionConfig};
use crate::generator::{assemble_generator_prompt, extract_candidate, generate_candidate, GenerateError};
use crate::llm::{self, ChatMessage, ChatRequest};
use crate::proto::{
    Action, AttemptRecord, AttemptSummary, CandidateSql, ExecutionOutcome, FactSheet, FewShotExample, Mode,
    ResultTable, SessionOutcome, SqlOrigin, TraceEvent, TraceHeader, Verdict,
};
use crate::retrieval::{assemble_context, ContextOptions, SchemaContext, SchemaIndex};
use crate::schema::{render_ddl, ColumnRef, EnrichedSchema};
use crate::sql::{analyze_result, execute, format_result, guardrail_check, validate_syntax, Database, ExecError, ExecOptions};

pub const EMIT_MARKER: &str = "[EMIT]";
pub const PROBE_MARKER: &str = "[PROBE]";
pub const REFLECT_MARKER: &str = "[REFLECT]";

const PREVIEW_CHARS: usize = 500;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionRequest {
    pub question: String,
    pub business_rules: Vec<String>,
    pub few_shot: Vec<FewShotExample>,
    /// Generated when absent.
    pub trace_id: Option<String>,
}

impl SessionRequest {
    pub fn new(question: impl Into<String>) -> Self {
        Self {
            question: question.into(),
            ..Default::default()
        }
    }
}

/// The progress ledger of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub trace_id: String,
    pub database_id: String,
    pub question: String,
    pub fact_sheet: Arc<FactSheet>,
    pub schema_context: SchemaContext,
    /// Schema shown to the fast loop: the fact sheet's tables when it names any.
    pub fast_schema_ddl: String,
    pub attempts: Vec<AttemptRecord>,
    pub feedback: Vec<Feedback>,
    pub consecutive_failures: usize,
    pub mode: Mode,
    pub total_budget: usize,
    pub budget_remaining: usize,
    pub probes_used: usize,
    /// SQL-writing calls (orchestrator or generator) plus executions.
    pub turns: usize,
    pub outcome: Option<SessionOutcome>,
}

impl SessionState {
    pub fn fact_sheet_message(&self) -> ChatMessage {
        let sheet = serde_json::to_string_pretty(self.fact_sheet.as_ref()).expect("fact sheet serializes");
        ChatMessage::user(format!("Fact sheet:\n{sheet}\n\nSchema:\n{}", self.fast_schema_ddl))
    }

    pub fn latest_accepted(&self) -> bool {
        self.attempts.last().is_some_and(AttemptRecord::accepted)
    }
}

pub fn attempt_summary(a: &AttemptRecord) -> AttemptSummary {
    AttemptSummary {
        index: a.index,
        mode: a.mode,
        sql: a.sql_text().map(str::to_string),
        verdict: a.verdict,
        reason: a.rejection_reason.clone(),
    }
}

/// Best-effort tier: 3 executed with rows, 2 executed empty, 1 parse-valid
/// but failed at execution. `None` for attempts that never qualify
/// (unparseable, guardrail-denied or missing SQL).
pub fn best_effort_rank(a: &AttemptRecord) -> Option<u8> {
    if a.sql.is_none() || !a.validation.as_ref().is_some_and(|v| v.is_ok()) || !a.guardrail_allowed() {
        return None;
    }
    Some(match &a.execution {
        ExecutionOutcome::Table { table } if table.row_count > 0 => 3,
        ExecutionOutcome::Table { .. } => 2,
        _ => 1,
    })
}

fn fast_ddl(schema: &EnrichedSchema, context: &SchemaContext, sheet: &FactSheet) -> String {
    let wanted: Vec<String> = sheet.required_tables.iter().map(|t| t.to_lowercase()).collect();
    let selection: std::collections::BTreeSet<ColumnRef> = context
        .included_columns
        .iter()
        .filter(|c| wanted.contains(&c.table.to_lowercase()))
        .cloned()
        .collect();
    if selection.is_empty() {
        return context.ddl_text.clone();
    }
    render_ddl(schema, Some(&selection)).unwrap_or_else(|_| context.ddl_text.clone())
}

struct Run<'a> {
    config: &'a SessionConfig,
    providers: &'a Providers,
    db: &'a Database,
    few_shot: &'a [FewShotExample],
    sink: &'a mut dyn TraceSink,
}

impl Run<'_> {
    fn emit(&mut self, event: TraceEvent) -> Result<(), SessionError> {
        self.sink.event(&event)?;
        Ok(())
    }

    fn run_sql(&mut self, candidate: &CandidateSql, row_limit: u64, counted: bool) -> Result<Result<ResultTable, ExecError>, SessionError> {
        self.emit(TraceEvent::ToolInvoked {
            tool: "sql_execute".into(),
            args: json!({ "sql": candidate.sql_text, "row_limit": row_limit }),
        })?;
        let mut opts = ExecOptions::new(row_limit, self.config.statement_timeout());
        if counted {
            opts = opts.counting_up_to(self.config.magnitude_threshold);
        }
        Ok(execute(self.db, candidate, &opts))
    }

    fn ask(&self, provider: &crate::llm::ProviderHandle, messages: Vec<ChatMessage>) -> Result<String, StepError> {
        let reply = llm::complete(provider.as_ref(), &ChatRequest::new(&self.config.orchestrator, messages))?;
        Ok(reply.content)
    }

    fn fast_messages(&self, state: &SessionState, system: String) -> Result<Vec<ChatMessage>, StepError> {
        let limit = self.config.prompt_limit_tokens.saturating_sub(crate::tokens::estimate(&system));
        let mut messages = vec![ChatMessage::system(system)];
        messages.extend(prune_context(state, limit)?);
        Ok(messages)
    }

    fn emit_candidate(&self, state: &SessionState) -> Result<Result<CandidateSql, String>, StepError> {
        let system = format!(
            "{EMIT_MARKER} You are the orchestrator of a text-to-SQL system. Write one read-only {} query that \
             answers the question, using the fact sheet, the schema and the feedback on earlier attempts. \
             Reply with the query in a ```sql fenced block.",
            self.config.dialect
        );
        let messages = self.fast_messages(state, system)?;
        let reply = self.ask(&self.providers.orchestrator, messages)?;
        Ok(extract_candidate(&reply, &self.config.dialect, SqlOrigin::OrchestratorEmit).map_err(|e| e.to_string()))
    }

    fn generate(&mut self, state: &SessionState) -> Result<Result<CandidateSql, String>, SessionError> {
        let compressed = if state.attempts.is_empty() {
            None
        } else {
            let c = compress_history(&state.question, &state.attempts, self.config.compression_cap_chars);
            self.emit(TraceEvent::ContextCompressed {
                chars: c.render().chars().count(),
            })?;
            Some(c)
        };
        let prompt = assemble_generator_prompt(
            &state.fact_sheet,
            &state.schema_context,
            compressed.as_ref(),
            self.few_shot,
            &self.config.dialect,
        );
        match generate_candidate(&prompt, &self.providers.generator, &self.config.generator, &self.config.dialect) {
            Ok(c) => Ok(Ok(c)),
            Err(e @ GenerateError::NoSqlFound { .. }) => Ok(Err(e.to_string())),
            Err(GenerateError::Provider(e)) => Err(step_failure(self.sink, state, e.into())),
        }
    }

    fn reflect_on_empty(&self, state: &SessionState, candidate: &CandidateSql) -> Result<bool, StepError> {
        let messages = vec![
            ChatMessage::system(format!(
                "{REFLECT_MARKER} You review SQL results. Reply YES if an empty result is the correct answer to \
                 the question, otherwise NO."
            )),
            ChatMessage::user(format!(
                "Question: {}\nSQL:\n{}\nThe query ran without error and returned no rows.",
                state.question, candidate.sql_text
            )),
        ];
        let reply = self.ask(&self.providers.orchestrator, messages)?;
        Ok(reply.trim_start().to_ascii_uppercase().starts_with("YES"))
    }

    fn evaluate(&mut self, state: &mut SessionState, candidate: Result<CandidateSql, String>) -> Result<AttemptRecord, SessionError> {
        let mut record = AttemptRecord {
            index: state.attempts.len() + 1,
            mode: state.mode,
            sql: None,
            validation: None,
            guardrail: None,
            execution: ExecutionOutcome::NotRun,
            heuristics: None,
            verdict: Verdict::Rejected,
            rejection_reason: None,
            emptiness_affirmed: false,
        };
        let candidate = match candidate {
            Ok(c) => c,
            Err(reason) => {
                record.rejection_reason = Some(reason);
                return Ok(record);
            }
        };
        record.sql = Some(candidate.clone());

        let validation = validate_syntax(&candidate);
        record.validation = Some(validation.clone());
        if let crate::proto::ParseOutcome::Diagnostic(d) = validation {
            record.rejection_reason = Some(format!("syntax error at line {} column {}: {}", d.line, d.column, d.message));
            return Ok(record);
        }
        let verdict = guardrail_check(&candidate);
        record.guardrail = Some(verdict.clone());
        if let crate::proto::GuardrailVerdict::Deny { class, reason } = verdict {
            record.rejection_reason = Some(format!("guardrail denied {} statement: {reason}", class.label()));
            return Ok(record);
        }
        state.turns += 1;
        let table = match self.run_sql(&candidate, self.config.row_limit, true)? {
            Ok(t) => t,
            Err(e) => {
                record.execution = ExecutionOutcome::Error {
                    kind: e.kind,
                    message: e.message.clone(),
                };
                record.rejection_reason = Some(format!("execution failed: {}", e.message));
                return Ok(record);
            }
        };
        let report = analyze_result(&table, self.config.magnitude_threshold);
        record.execution = ExecutionOutcome::Table { table };
        record.heuristics = Some(report.clone());
        if report.magnitude_flag {
            record.rejection_reason = Some(format!(
                "result has more than {} rows; the question likely needs aggregation or tighter filters",
                self.config.magnitude_threshold
            ));
        } else if report.empty_result {
            let affirmed = self
                .reflect_on_empty(state, &candidate)
                .map_err(|e| step_failure(self.sink, state, e))?;
            if affirmed {
                record.verdict = Verdict::Accepted;
                record.emptiness_affirmed = true;
            } else {
                record.rejection_reason = Some("query returned no rows".into());
            }
        } else {
            record.verdict = Verdict::Accepted;
        }
        Ok(record)
    }

    fn probe(&mut self, state: &mut SessionState) -> Result<(), SessionError> {
        let system = format!(
            "{PROBE_MARKER} You are the orchestrator of a text-to-SQL system. Before answering, write one small \
             exploratory read-only {} query, for example to inspect distinct values or formats of a column. \
             Reply with the query in a ```sql fenced block.",
            self.config.dialect
        );
        let messages = self.fast_messages(state, system).map_err(|e| step_failure(self.sink, state, e))?;
        let reply = self
            .ask(&self.providers.orchestrator, messages)
            .map_err(|e| step_failure(self.sink, state, e))?;
        state.probes_used += 1;
        let (sql, outcome, text) = match extract_candidate(&reply, &self.config.dialect, SqlOrigin::OrchestratorEmit) {
            Ok(c) => {
                state.turns += 1;
                let outcome = match self.run_sql(&c, self.config.row_limit, false)? {
                    Ok(table) => ExecutionOutcome::Table { table },
                    Err(e) => ExecutionOutcome::Error {
                        kind: e.kind,
                        message: e.message,
                    },
                };
                let shown = match &outcome {
                    ExecutionOutcome::Table { table } => format_result(table, PREVIEW_CHARS),
                    ExecutionOutcome::Error { message, .. } => format!("error: {message}"),
                    ExecutionOutcome::NotRun => String::new(),
                };
                (Some(c.sql_text), outcome, shown)
            }
            Err(e) => (None, ExecutionOutcome::NotRun, e.to_string()),
        };
        state.feedback.push(Feedback {
            attempt: None,
            message: ChatMessage::tool(format!(
                "Probe {} SQL:\n{}\nResult:\n{text}",
                state.probes_used,
                sql.as_deref().unwrap_or("(none)")
            )),
        });
        self.emit(TraceEvent::ProbeFinished { sql, outcome })
    }

    fn record(&mut self, state: &mut SessionState, attempt: AttemptRecord) -> Result<(), SessionError> {
        let mode = match attempt.mode {
            Mode::Fast => "fast",
            Mode::Slow => "slow",
        };
        let mut text = format!(
            "Attempt {} ({mode}) SQL:\n{}\nOutcome: {}",
            attempt.index,
            attempt.sql_text().unwrap_or("(none)"),
            outcome_summary(&attempt)
        );
        if let Some(reason) = &attempt.rejection_reason {
            text.push_str(&format!("\nRejected: {reason}"));
        }
        if let Some(table) = attempt.execution.table() {
            text.push_str(&format!("\nResult preview:\n{}", format_result(table, PREVIEW_CHARS)));
        }
        state.feedback.push(Feedback {
            attempt: Some(attempt.index),
            message: ChatMessage::tool(text),
        });
        if attempt.accepted() {
            state.consecutive_failures = 0;
        } else {
            state.consecutive_failures += 1;
        }
        state.budget_remaining -= 1;
        state.attempts.push(attempt.clone());
        self.emit(TraceEvent::AttemptFinished { attempt })
    }

    fn finish(&mut self, state: &mut SessionState) -> Result<SessionOutcome, SessionError> {
        let (chosen, best_effort) = if state.latest_accepted() {
            (state.attempts.last().cloned(), false)
        } else {
            let best = state
                .attempts
                .iter()
                .filter_map(|a| best_effort_rank(a).map(|r| (r, a.index, a)))
                .max_by_key(|(r, i, _)| (*r, *i))
                .map(|(_, _, a)| a.clone());
            (best, true)
        };
        let Some(attempt) = chosen else {
            return Ok(SessionOutcome {
                final_sql: None,
                result: None,
                best_effort: true,
                chosen_attempt: None,
            });
        };
        let candidate = attempt.sql.clone().expect("chosen attempts carry SQL");
        let result = match attempt.execution.table() {
            Some(preview) => match self.run_sql(&candidate, self.config.final_row_cap, false)? {
                Ok(full) => Some(full),
                Err(e) => {
                    tracing::warn!(error = %e, "final re-execution failed, keeping the attempt's rows");
                    Some(preview.clone())
                }
            },
            None => None,
        };
        Ok(SessionOutcome {
            final_sql: Some(candidate.sql_text),
            result,
            best_effort,
            chosen_attempt: Some(attempt.index),
        })
    }
}

fn step_failure(sink: &mut dyn TraceSink, state: &SessionState, source: StepError) -> SessionError {
    let _ = sink.event(&TraceEvent::SessionFailed {
        message: source.to_string(),
    });
    SessionError::Step {
        source,
        partial: Box::new(state.clone()),
    }
}

/// Answers one question.
///
/// Terminates after at most `config.total_budget` attempts. Model mistakes
/// (bad SQL, denied statements, empty or oversized results) become rejected
/// attempts; when none is accepted the outcome is the best-ranked earlier
/// attempt with `best_effort` set. Provider and trace failures end the
/// session with an error carrying the partial state.
pub fn run_session(
    request: &SessionRequest,
    schema: &EnrichedSchema,
    index: &SchemaIndex,
    config: &SessionConfig,
    providers: &Providers,
    db: &Database,
    sink: &mut dyn TraceSink,
) -> Result<SessionState, SessionError> {
    let trace_id = request.trace_id.clone().unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
    let question = request.question.trim().to_string();
    sink.header(&TraceHeader::new(&trace_id, &schema.database_id, &question))?;

    let context_opts = ContextOptions {
        budget_tokens: config.context_budget_tokens,
        k: config.top_k,
        model: config.orchestrator.clone(),
    };
    let context = match assemble_context(schema, index, &question, &context_opts, &providers.orchestrator, providers.embedder.as_ref()) {
        Ok(c) => c,
        Err(e) => {
            sink.event(&TraceEvent::SessionFailed { message: e.to_string() })?;
            return Err(e.into());
        }
    };
    if !context.bypass_used {
        sink.event(&TraceEvent::ToolInvoked {
            tool: "schema_search".into(),
            args: json!({ "query": context.entities, "k": config.top_k }),
        })?;
    }
    sink.event(&TraceEvent::ContextAssembled {
        bypass_used: context.bypass_used,
        included_columns: context.included_columns.len(),
        token_estimate: context.token_estimate,
        entities: context.entities.clone(),
    })?;

    let (sheet, repaired, fallback) =
        match compile_fact_sheet(&question, &context, &request.business_rules, &providers.orchestrator, &config.orchestrator) {
            Ok((sheet, repaired)) => (sheet, repaired, false),
            Err(FactSheetError::PlannerUnparseable { .. }) => {
                tracing::warn!("planner output unusable, continuing with a minimal fact sheet");
                (FactSheet::minimal(&question, request.business_rules.clone()), true, true)
            }
            Err(FactSheetError::Provider(e)) => {
                sink.event(&TraceEvent::SessionFailed { message: e.to_string() })?;
                return Err(SessionError::Planner(e));
            }
        };
    sink.event(&TraceEvent::FactSheetCompiled {
        fact_sheet: sheet.clone(),
        repaired,
        fallback,
    })?;

    let mut state = SessionState {
        trace_id,
        database_id: schema.database_id.clone(),
        question,
        fast_schema_ddl: fast_ddl(schema, &context, &sheet),
        fact_sheet: Arc::new(sheet),
        schema_context: context,
        attempts: Vec::new(),
        feedback: Vec::new(),
        consecutive_failures: 0,
        mode: Mode::Fast,
        total_budget: config.total_budget,
        budget_remaining: config.total_budget,
        probes_used: 0,
        turns: 0,
        outcome: None,
    };
    let mut run = Run {
        config,
        providers,
        db,
        few_shot: &request.few_shot,
        sink,
    };

    loop {
        if state.budget_remaining == 0 && !state.latest_accepted() {
            break;
        }
        let decision = decide_action(&state, config, &providers.orchestrator).map_err(|e| step_failure(run.sink, &state, e))?;
        run.emit(TraceEvent::DecisionMade {
            action: decision.action,
            forced: decision.forced,
            raw_reply: decision.raw_reply.clone(),
        })?;
        let candidate = match decision.action {
            Action::Finalize => break,
            Action::DelegateExecute => {
                run.probe(&mut state)?;
                continue;
            }
            Action::Emit => {
                state.turns += 1;
                run.emit_candidate(&state).map_err(|e| step_failure(run.sink, &state, e))?
            }
            Action::DelegateGenerate => {
                if state.mode == Mode::Fast {
                    run.emit(TraceEvent::ModeChanged {
                        from: Mode::Fast,
                        to: Mode::Slow,
                        consecutive_failures: state.consecutive_failures,
                    })?;
                    state.mode = Mode::Slow;
                }
                state.turns += 1;
                run.generate(&state)?
            }
        };
        let attempt = run.evaluate(&mut state, candidate)?;
        run.record(&mut state, attempt)?;
    }

    let outcome = run.finish(&mut state)?;
    run.emit(TraceEvent::SessionFinished {
        outcome: outcome.clone(),
        attempts: state.attempts.len(),
    })?;
    state.outcome = Some(outcome);
    Ok(state)
}
