use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ResultCode;
use crate::llm::{complete, ChatMessage, ChatRequest, LlmError, ModelSettings, ProviderHandle};
use crate::prompts::extract_json_object;
use crate::proto::ResultTable;
use crate::sql::format_result;

pub const JUDGE_MARKER: &str = "[JUDGE]";

const JUDGE_SYSTEM: &str = "[JUDGE] You grade answers produced by a text-to-SQL system against a reference answer.";

const REPAIR: &str = "[JUDGE] Your reply could not be read. Reply with only the JSON object, with \"Classification code\" set to one of RES1, RES2, RES3, RES4, RES5 or RES6.";

pub const UNPARSEABLE_REASON: &str = "judge output unparseable";

pub const JUDGE_TEMPLATE: &str = "\
Classify each output from the SQL Execution Agent according to the following criteria and the ground truth and the generated answer provided to you:

    The ground truth answer is: {ground_truth_table}
    The generated answer is: {generated_table}

The classification codes are:
    RES1. Failed Execution: Query failed due to syntax errors, missing tables, or other runtime issues.
    RES2. Executed, Incorrect Result: Query executed but the result does not match the ground truth, and the ground truth is NOT present in the answer.
    RES3. Executed, Correct Result: Query executed and the result matches the ground truth (only cases with brackets or syntax -- NOT other numbers or letters).
    RES4. Executed, No Result: Query executed but returned no rows or None.
    RES5. Executed, Partial Match: Query executed and the result partially matches the ground truth, where ground truth exists but there ARE other numbers or letters.
    RES6. Unexpected Result: Query executed but returned a malformed or unexpected result.

Examples:
    RES3: ground truth: [(71,)] → generated answer: (71,)
    RES3: ground truth: [(71, Bank)] → generated answer: (Bank, 71)
    RES5: ground truth: [(71,)] → generated answer: (71, 72)
    RES4: ground truth: [(71,)] → generated answer: None
    RES2: ground truth: [(71,)] → generated answer: (72,)

RETURN a JSON:
{\"Classification code\": \"<add it here>\", \"Reasoning\": \"<explanation>\"}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgement {
    pub code: ResultCode,
    pub reasoning: String,
    /// The first reply was unreadable and a repair prompt was sent.
    pub repaired: bool,
}

fn first_chars(text: &str, cap: usize) -> String {
    text.chars().take(cap).collect()
}

/// The template filled with both renderings, each cut to `cap` characters.
pub fn judge_prompt(ground_truth: &ResultTable, generated: Result<&ResultTable, &str>, cap: usize) -> String {
    let gt = first_chars(&format_result(ground_truth, usize::MAX), cap);
    let gen = match generated {
        Ok(t) => format_result(t, usize::MAX),
        Err(e) => format!("Error: {e}"),
    };
    JUDGE_TEMPLATE
        .replace("{ground_truth_table}", &gt)
        .replace("{generated_table}", &first_chars(&gen, cap))
}

fn code_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)RES\s*([1-6])").expect("valid regex"))
}

fn single_code(text: &str) -> Option<ResultCode> {
    let codes: BTreeSet<u8> = code_re()
        .captures_iter(text)
        .filter_map(|c| c[1].parse().ok())
        .collect();
    match codes.len() {
        1 => ResultCode::from_number(*codes.first()?),
        _ => None,
    }
}

/// Reads the JSON "Classification code" field; a reply without JSON is
/// accepted only when it names exactly one code.
pub fn parse_judge_reply(reply: &str) -> Option<(ResultCode, String)> {
    if let Some(Value::Object(map)) = extract_json_object(reply) {
        let field = |name: &str| {
            map.iter()
                .find(|(k, _)| k.trim().eq_ignore_ascii_case(name))
                .map(|(_, v)| match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
        };
        if let Some(code) = field("Classification code").and_then(|c| single_code(&c)) {
            return Some((code, field("Reasoning").unwrap_or_default()));
        }
        return None;
    }
    single_code(reply).map(|c| (c, reply.trim().to_string()))
}

/// Classifies one generated answer. Provider errors propagate; an unreadable
/// reply gets one repair prompt and then becomes RES6.
pub fn judge(
    ground_truth: &ResultTable,
    generated: Result<&ResultTable, &str>,
    provider: &ProviderHandle,
    model: &ModelSettings,
    cap: usize,
) -> Result<Judgement, LlmError> {
    let mut messages = vec![
        ChatMessage::system(JUDGE_SYSTEM),
        ChatMessage::user(judge_prompt(ground_truth, generated, cap)),
    ];
    let first = complete(provider.as_ref(), &ChatRequest::new(model, messages.clone()))?.content;
    if let Some((code, reasoning)) = parse_judge_reply(&first) {
        return Ok(Judgement { code, reasoning, repaired: false });
    }
    messages.push(ChatMessage::assistant(first));
    messages.push(ChatMessage::user(REPAIR));
    let second = complete(provider.as_ref(), &ChatRequest::new(model, messages))?.content;
    Ok(match parse_judge_reply(&second) {
        Some((code, reasoning)) => Judgement { code, reasoning, repaired: true },
        None => Judgement {
            code: ResultCode::Res6,
            reasoning: UNPARSEABLE_REASON.to_string(),
            repaired: true,
        },
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::llm::{RecordingProvider, ScriptEntry, ScriptedProvider};
    use crate::proto::Scalar;

    fn table(vals: &[i64]) -> ResultTable {
        ResultTable::new(vec!["n".into()], vec![vals.iter().map(|v| Scalar::Integer(*v)).collect()])
    }

    #[test]
    fn parses_structured_reply() {
        let (c, r) = parse_judge_reply(r#"Sure. {"Classification code": "RES3", "Reasoning": "same value"}"#).unwrap();
        assert_eq!((c, r.as_str()), (ResultCode::Res3, "same value"));
        assert_eq!(parse_judge_reply("RES 5").unwrap().0, ResultCode::Res5);
        assert!(parse_judge_reply("RES3 or RES5").is_none());
        assert!(parse_judge_reply(r#"{"Reasoning": "x"}"#).is_none());
    }

    #[test]
    fn prompt_holds_both_renderings_and_codes() {
        let long = ResultTable::new(vec!["n".into()], (0..400).map(|i| vec![Scalar::Integer(i)]).collect());
        let p = judge_prompt(&table(&[71]), Ok(&long), 500);
        assert!(p.contains("The ground truth answer is: n\n--\n71\n(1 row)"));
        for i in 1..=6 {
            assert!(p.contains(&format!("RES{i}. ")));
        }
        let generated = p.split("The generated answer is: ").nth(1).unwrap().split("\n\nThe classification").next().unwrap();
        assert_eq!(generated.chars().count(), 500);
    }

    #[test]
    fn unparseable_twice_is_res6() {
        let inner: crate::llm::ProviderHandle = Arc::new(ScriptedProvider::new(vec![ScriptEntry::sticky("*", "I think it is fine")]).unwrap());
        let rec = Arc::new(RecordingProvider::new(inner));
        let handle: crate::llm::ProviderHandle = rec.clone();
        let j = judge(&table(&[71]), Err("no such table"), &handle, &ModelSettings::default(), 500).unwrap();
        assert_eq!(j.code, ResultCode::Res6);
        assert_eq!(j.reasoning, UNPARSEABLE_REASON);
        assert_eq!(rec.requests().len(), 2);
        assert!(rec.requests()[0].transcript().contains("Error: no such table"));
    }
}
