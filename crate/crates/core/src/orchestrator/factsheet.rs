use serde_json::Value;

use super::FactSheetError;
use crate::llm::{self, ChatMessage, ChatRequest, ModelSettings, ProviderHandle};
use crate::prompts::extract_json_object;
use crate::proto::{FactSheet, JoinPath, SubQuestion};
use crate::retrieval::SchemaContext;

pub const FACT_SHEET_MARKER: &str = "[FACT_SHEET]";

const PLANNER_SYSTEM: &str = "[FACT_SHEET] You are the planning orchestrator of a text-to-SQL system. \
Compile a fact sheet for the question: a JSON object with keys \
\"sub_questions\" (list of {\"text\", \"depends_on\": [indices of earlier sub-questions]}), \
\"required_tables\", \"join_paths\" (list of {\"from_table\", \"from_column\", \"to_table\", \"to_column\"}), \
\"filters\", \"group_by\", \"metrics\" and \"business_rules\" (lists of strings). Reply with the JSON object only.";

const REPAIR: &str = "[FACT_SHEET] That reply was not a JSON object with the requested keys. \
Reply again with only the JSON object.";

fn strings(v: Option<&Value>) -> Vec<String> {
    v.and_then(Value::as_array)
        .map(|items| {
            items
                .iter()
                .map(|i| match i {
                    Value::String(s) => s.trim().to_string(),
                    other => other.to_string(),
                })
                .filter(|s| !s.is_empty())
                .collect()
        })
        .unwrap_or_default()
}

fn sub_questions(v: Option<&Value>) -> Vec<SubQuestion> {
    let Some(items) = v.and_then(Value::as_array) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for item in items {
        let (text, deps) = match item {
            Value::String(s) => (s.clone(), Vec::new()),
            Value::Object(o) => {
                let text = o
                    .get("text")
                    .or_else(|| o.get("question"))
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_string();
                let deps = o
                    .get("depends_on")
                    .and_then(Value::as_array)
                    .map(|d| d.iter().filter_map(Value::as_u64).map(|x| x as usize).collect())
                    .unwrap_or_default();
                (text, deps)
            }
            _ => continue,
        };
        if text.trim().is_empty() {
            continue;
        }
        let own = out.len();
        // only edges to earlier sub-questions, which keeps the order acyclic
        let mut depends_on: Vec<usize> = deps.into_iter().filter(|d| *d < own).collect();
        depends_on.sort_unstable();
        depends_on.dedup();
        out.push(SubQuestion {
            text: text.trim().to_string(),
            depends_on,
        });
    }
    out
}

fn join_path_of(item: &Value) -> Option<JoinPath> {
    match item {
        Value::Object(o) => {
            let f = |k: &str| o.get(k).and_then(Value::as_str).map(|s| s.trim().to_string());
            Some(JoinPath {
                from_table: f("from_table")?,
                from_column: f("from_column")?,
                to_table: f("to_table")?,
                to_column: f("to_column")?,
            })
        }
        Value::String(s) => {
            let (l, r) = s.split_once('=')?;
            let (lt, lc) = l.trim().split_once('.')?;
            let (rt, rc) = r.trim().split_once('.')?;
            Some(JoinPath {
                from_table: lt.trim().to_string(),
                from_column: lc.trim().to_string(),
                to_table: rt.trim().to_string(),
                to_column: rc.trim().to_string(),
            })
        }
        _ => None,
    }
}

/// Parses a planner reply. Missing keys default to empty lists; the
/// question always comes from the caller and the caller's rules come first.
pub fn parse_fact_sheet(reply: &str, question: &str, business_rules: &[String]) -> Option<FactSheet> {
    let v = extract_json_object(reply)?;
    let known = [
        "sub_questions",
        "required_tables",
        "join_paths",
        "filters",
        "group_by",
        "metrics",
        "business_rules",
    ];
    if !known.iter().any(|k| v.get(k).is_some()) {
        return None;
    }
    let mut rules: Vec<String> = business_rules.to_vec();
    for r in strings(v.get("business_rules")) {
        if !rules.contains(&r) {
            rules.push(r);
        }
    }
    Some(FactSheet {
        question: question.to_string(),
        sub_questions: sub_questions(v.get("sub_questions")),
        required_tables: strings(v.get("required_tables")),
        join_paths: v
            .get("join_paths")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(join_path_of).collect())
            .unwrap_or_default(),
        filters: strings(v.get("filters")),
        group_by: strings(v.get("group_by")),
        metrics: strings(v.get("metrics")),
        business_rules: rules,
    })
}

/// Asks the orchestrator model for the plan; one repair prompt on an
/// unparseable reply. Returns the sheet and whether the repair was needed.
pub fn compile_fact_sheet(
    question: &str,
    schema_context: &SchemaContext,
    business_rules: &[String],
    provider: &ProviderHandle,
    model: &ModelSettings,
) -> Result<(FactSheet, bool), FactSheetError> {
    let mut context = format!("Schema:\n{}", schema_context.ddl_text);
    if !business_rules.is_empty() {
        context.push_str("\n\nBusiness rules:\n");
        for r in business_rules {
            context.push_str(&format!("- {r}\n"));
        }
    }
    let mut messages = vec![
        ChatMessage::system(PLANNER_SYSTEM),
        ChatMessage::user(context),
        ChatMessage::user(question),
    ];
    let reply = llm::complete(provider.as_ref(), &ChatRequest::new(model, messages.clone()))?;
    if let Some(sheet) = parse_fact_sheet(&reply.content, question, business_rules) {
        return Ok((sheet, false));
    }
    tracing::info!("planner reply unparseable, issuing repair prompt");
    messages.push(ChatMessage::assistant(reply.content));
    messages.push(ChatMessage::user(REPAIR));
    let repaired = llm::complete(provider.as_ref(), &ChatRequest::new(model, messages))?;
    parse_fact_sheet(&repaired.content, question, business_rules)
        .map(|s| (s, true))
        .ok_or(FactSheetError::PlannerUnparseable {
            reply: repaired.content,
        })
}
