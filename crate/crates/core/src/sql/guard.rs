use std::ops::ControlFlow;

use sqlparser::ast::{visit_statements, Statement};
use sqlparser::keywords::Keyword;
use sqlparser::tokenizer::{Token, Tokenizer};

use super::{dialect_for, parse_statements, BlockedClass, CandidateSql, GuardrailVerdict};

/// Allows only pure read statements.
///
/// The decision is made on the parse tree: every statement reachable from the
/// input (top level, compound scripts, CTE bodies, set operations) must be a
/// query. Input that does not parse is denied.
pub fn guardrail_check(candidate: &CandidateSql) -> GuardrailVerdict {
    let statements = match parse_statements(&candidate.sql_text, &candidate.dialect) {
        Ok(s) => s,
        Err(e) => {
            let class = first_blocked_keyword(&candidate.sql_text, &candidate.dialect);
            let reason = match class {
                Some(c) => format!("unparseable statement containing {}: {e}", c.label().to_uppercase()),
                None => format!("unparseable statement: {e}"),
            };
            return GuardrailVerdict::Deny {
                class: class.unwrap_or(BlockedClass::Unparseable),
                reason,
            };
        }
    };
    if statements.is_empty() {
        return GuardrailVerdict::Deny {
            class: BlockedClass::Unparseable,
            reason: "no statement found".to_string(),
        };
    }

    let found = visit_statements(&statements, |stmt| match classify(stmt) {
        Some(class) => ControlFlow::Break(class),
        None => ControlFlow::Continue(()),
    });
    match found {
        ControlFlow::Break(class) => GuardrailVerdict::Deny {
            class,
            reason: format!("{} statements are not allowed", class.label().to_uppercase()),
        },
        ControlFlow::Continue(()) => GuardrailVerdict::Allow,
    }
}

fn classify(stmt: &Statement) -> Option<BlockedClass> {
    let class = match stmt {
        Statement::Query(_) => return None,
        Statement::Insert(ins) => {
            let verb = ins.insert_token.0.token.to_string();
            if ins.replace_into || verb.eq_ignore_ascii_case("replace") {
                BlockedClass::Replace
            } else {
                BlockedClass::Insert
            }
        }
        Statement::Update(_) => BlockedClass::Update,
        Statement::Delete(_) => BlockedClass::Delete,
        Statement::Merge(_) => BlockedClass::Merge,
        Statement::Truncate(_) => BlockedClass::Truncate,
        other => {
            // the AST has dozens of CREATE*/ALTER*/DROP* variants; group them by name
            let debug = format!("{other:?}");
            let variant: String = debug.chars().take_while(|c| c.is_alphanumeric()).collect();
            if variant.starts_with("Create") {
                BlockedClass::Create
            } else if variant.starts_with("Alter") {
                BlockedClass::Alter
            } else if variant.starts_with("Drop") {
                BlockedClass::Drop
            } else {
                BlockedClass::OtherNonRead
            }
        }
    };
    Some(class)
}

/// Best-effort labelling of unparseable input: the first keyword token that
/// names a blocked verb. String literals and comments are separate tokens and
/// never match.
fn first_blocked_keyword(sql: &str, dialect: &str) -> Option<BlockedClass> {
    let d = dialect_for(dialect);
    let tokens = Tokenizer::new(&*d, sql).tokenize().ok()?;
    tokens.iter().find_map(|t| match t {
        Token::Word(w) => match w.keyword {
            Keyword::INSERT => Some(BlockedClass::Insert),
            Keyword::UPDATE => Some(BlockedClass::Update),
            Keyword::DELETE => Some(BlockedClass::Delete),
            Keyword::MERGE => Some(BlockedClass::Merge),
            Keyword::CREATE => Some(BlockedClass::Create),
            Keyword::ALTER => Some(BlockedClass::Alter),
            Keyword::DROP => Some(BlockedClass::Drop),
            Keyword::TRUNCATE => Some(BlockedClass::Truncate),
            Keyword::REPLACE => Some(BlockedClass::Replace),
            _ => None,
        },
        _ => None,
    })
}
