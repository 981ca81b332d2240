//! The slow-loop SQL writer: enriched prompt assembly and SQL extraction.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::llm::{self, ChatMessage, ChatRequest, LlmError, ModelSettings, ProviderHandle};
use crate::orchestrator::CompressedContext;
use crate::proto::{CandidateSql, FactSheet, FewShotExample, SqlOrigin};
use crate::retrieval::SchemaContext;
use crate::sql::validate_text;

pub const GENERATE_MARKER: &str = "[GENERATE]";

const SYSTEM_PREAMBLE: &str = "[GENERATE] You are an expert SQL writer. Work through the scratchpad, \
then give exactly one read-only query in a ```sql fenced block at the end of your reply.";

pub const SCRATCHPAD: &str = "Fill in this checklist before writing SQL:
1. Decomposition: break the question into sub-questions and order them.
2. Filters and measures: list every filter value and every metric to compute.
3. Join paths: name the tables needed and the key columns that connect them.
4. Aggregation scope: state what each aggregate is grouped by, if anything.
5. WHERE clauses: write each predicate with the exact literal format found in the data.
6. Column existence: confirm every referenced column appears in the schema above.";

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("no SQL statement found in the reply")]
    NoSqlFound { reply: String },
    #[error(transparent)]
    Provider(#[from] LlmError),
}

fn dialect_instructions(dialect: &str) -> String {
    match dialect {
        "sqlite" => "Dialect: SQLite. Quote identifiers that contain spaces or clash with keywords using double quotes. \
Dates are stored as TEXT; use strftime('%Y', col) or substr for date parts. Use CAST(x AS REAL) before dividing \
integers. There is no FULL OUTER JOIN, ILIKE or TOP; use LIMIT."
            .to_string(),
        other => format!("Dialect: {other}. Use only syntax this dialect accepts."),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorPrompt {
    pub system_preamble: String,
    pub schema_ddl: String,
    pub dialect_instructions: String,
    pub fact_sheet: String,
    pub examples: Vec<FewShotExample>,
    pub compressed_context: Option<CompressedContext>,
    pub scratchpad_template: String,
    pub question_tail: String,
}

/// Pure: identical inputs give a byte-identical prompt.
pub fn assemble_generator_prompt(
    fact_sheet: &FactSheet,
    schema_context: &SchemaContext,
    compressed: Option<&CompressedContext>,
    few_shot: &[FewShotExample],
    dialect: &str,
) -> GeneratorPrompt {
    GeneratorPrompt {
        system_preamble: SYSTEM_PREAMBLE.to_string(),
        schema_ddl: schema_context.ddl_text.clone(),
        dialect_instructions: dialect_instructions(dialect),
        fact_sheet: serde_json::to_string_pretty(fact_sheet).expect("fact sheet serializes"),
        examples: few_shot.to_vec(),
        compressed_context: compressed.cloned(),
        scratchpad_template: SCRATCHPAD.to_string(),
        question_tail: fact_sheet.question.clone(),
    }
}

impl GeneratorPrompt {
    /// Sections in fixed order; the question is always the final content.
    pub fn render_user(&self) -> String {
        let mut sections = vec![
            format!("## Schema\n{}", self.schema_ddl),
            format!("## Dialect\n{}", self.dialect_instructions),
            format!("## Fact sheet\n{}", self.fact_sheet),
        ];
        if !self.examples.is_empty() {
            let ex: Vec<String> = self
                .examples
                .iter()
                .map(|e| format!("Question: {}\n```sql\n{}\n```", e.question, e.sql))
                .collect();
            sections.push(format!("## Examples\n{}", ex.join("\n\n")));
        }
        if let Some(c) = &self.compressed_context {
            sections.push(format!("## Previous attempts\n{}", c.render()));
        }
        sections.push(format!("## Scratchpad\n{}", self.scratchpad_template));
        sections.push(format!("## Question\n{}", self.question_tail));
        sections.join("\n\n")
    }

    pub fn messages(&self) -> Vec<ChatMessage> {
        vec![ChatMessage::system(&self.system_preamble), ChatMessage::user(self.render_user())]
    }
}

pub fn generate_candidate(
    prompt: &GeneratorPrompt,
    provider: &ProviderHandle,
    model: &ModelSettings,
    dialect: &str,
) -> Result<CandidateSql, GenerateError> {
    let request = ChatRequest::new(model, prompt.messages());
    let reply = llm::complete(provider.as_ref(), &request)?;
    extract_candidate(&reply.content, dialect, SqlOrigin::Generator)
}

pub fn extract_candidate(reply: &str, dialect: &str, origin: SqlOrigin) -> Result<CandidateSql, GenerateError> {
    match extract_sql(reply, dialect) {
        Some(sql_text) => Ok(CandidateSql {
            sql_text,
            dialect: dialect.to_string(),
            origin,
        }),
        None => Err(GenerateError::NoSqlFound { reply: reply.to_string() }),
    }
}

fn fence() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[A-Za-z0-9_-]*[ \t]*\r?\n(.*?)```").unwrap())
}

fn statement_start() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(select|with)\b").unwrap())
}

fn clean(sql: &str) -> String {
    sql.trim().trim_end_matches(';').trim().to_string()
}

fn parses(sql: &str, dialect: &str) -> bool {
    !sql.is_empty() && validate_text(sql, dialect).is_ok()
}

/// Longest parseable statement starting at `start`: up to the first `;`,
/// else the longest run of whole lines.
fn statement_at(reply: &str, start: usize, dialect: &str) -> Option<(String, usize)> {
    let rest = &reply[start..];
    if let Some(semi) = rest.find(';') {
        let candidate = clean(&rest[..semi]);
        if parses(&candidate, dialect) {
            return Some((candidate, start + semi));
        }
    }
    let mut ends: Vec<usize> = rest.match_indices('\n').map(|(i, _)| i).collect();
    ends.push(rest.len());
    for end in ends.into_iter().rev() {
        let candidate = clean(&rest[..end]);
        if parses(&candidate, dialect) {
            return Some((candidate, start + end));
        }
    }
    None
}

/// SQL from a model reply: the last fenced block that parses, else the last
/// parseable statement found by scanning for `SELECT`/`WITH`, else the last
/// fenced block as-is.
pub fn extract_sql(reply: &str, dialect: &str) -> Option<String> {
    let blocks: Vec<String> = fence().captures_iter(reply).map(|c| clean(&c[1])).collect();
    if let Some(b) = blocks.iter().rev().find(|b| parses(b, dialect)) {
        return Some(b.clone());
    }

    let mut last = None;
    let mut covered_until = 0;
    for m in statement_start().find_iter(reply) {
        if m.start() < covered_until {
            continue;
        }
        if let Some((sql, end)) = statement_at(reply, m.start(), dialect) {
            covered_until = end;
            last = Some(sql);
        }
    }
    last.or_else(|| blocks.into_iter().rev().find(|b| !b.is_empty()))
}
