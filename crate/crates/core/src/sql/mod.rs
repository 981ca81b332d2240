//! Syntax validation, DML guardrails, guarded read-only execution and result
//! formatting.

mod exec;
mod format;
mod guard;

use std::sync::OnceLock;

use regex::Regex;
use sqlparser::ast::Statement;
use sqlparser::dialect::{Dialect, GenericDialect, MySqlDialect, PostgreSqlDialect, SQLiteDialect};
use sqlparser::parser::{Parser, ParserError};
use sqlparser::tokenizer::{Token, Tokenizer};

pub use exec::{analyze_result, execute, Database, ExecError, ExecOptions, DEFAULT_MAGNITUDE_THRESHOLD};
pub use format::{format_result, TRUNCATION_MARKER};
pub use guard::guardrail_check;
pub use ledgersql_proto::{
    BlockedClass, CandidateSql, GuardrailVerdict, HeuristicReport, ParseOutcome, ResultTable, Scalar, SqlOrigin,
    SyntaxDiagnostic,
};

pub const DEFAULT_DIALECT: &str = "sqlite";

pub(crate) fn dialect_for(name: &str) -> Box<dyn Dialect> {
    match name.to_ascii_lowercase().as_str() {
        "sqlite" | "sqlite3" => Box::new(SQLiteDialect {}),
        "postgres" | "postgresql" => Box::new(PostgreSqlDialect {}),
        "mysql" => Box::new(MySqlDialect {}),
        _ => Box::new(GenericDialect {}),
    }
}

pub(crate) fn parse_statements(sql: &str, dialect: &str) -> Result<Vec<Statement>, ParserError> {
    Parser::parse_sql(&*dialect_for(dialect), sql)
}

/// `Ok` iff `candidate` parses as exactly one statement in its dialect.
pub fn validate_syntax(candidate: &CandidateSql) -> ParseOutcome {
    validate_text(&candidate.sql_text, &candidate.dialect)
}

pub fn validate_text(sql: &str, dialect: &str) -> ParseOutcome {
    match parse_statements(sql, dialect) {
        Ok(stmts) if stmts.len() == 1 => ParseOutcome::Ok,
        Ok(stmts) if stmts.is_empty() => ParseOutcome::Diagnostic(SyntaxDiagnostic {
            token_index: 0,
            line: 0,
            column: 0,
            message: "no statement found".to_string(),
        }),
        Ok(stmts) => ParseOutcome::Diagnostic(SyntaxDiagnostic {
            token_index: 0,
            line: 0,
            column: 0,
            message: format!("expected exactly one statement, found {}", stmts.len()),
        }),
        Err(e) => ParseOutcome::Diagnostic(diagnostic_from_error(sql, dialect, &e)),
    }
}

/// Validates a script of one or more statements (used for rendered DDL).
pub fn validate_script(sql: &str, dialect: &str) -> Result<usize, SyntaxDiagnostic> {
    parse_statements(sql, dialect)
        .map(|s| s.len())
        .map_err(|e| diagnostic_from_error(sql, dialect, &e))
}

fn location_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"Line: (\d+), Column: (\d+)").expect("valid regex"))
}

fn diagnostic_from_error(sql: &str, dialect: &str, err: &ParserError) -> SyntaxDiagnostic {
    let message = err.to_string();
    let (line, column) = location_re()
        .captures(&message)
        .and_then(|c| Some((c[1].parse().ok()?, c[2].parse().ok()?)))
        .unwrap_or((0, 0));
    SyntaxDiagnostic {
        token_index: token_index_at(sql, dialect, line, column),
        line,
        column,
        message: message.trim_start_matches("sql parser error: ").to_string(),
    }
}

/// 1-based position of the first significant token starting at or after
/// `(line, column)`.
fn token_index_at(sql: &str, dialect: &str, line: u64, column: u64) -> usize {
    if line == 0 {
        return 0;
    }
    let d = dialect_for(dialect);
    let Ok(tokens) = Tokenizer::new(&*d, sql).tokenize_with_location() else {
        return 0;
    };
    tokens
        .iter()
        .filter(|t| !matches!(t.token, Token::Whitespace(_) | Token::EOF))
        .position(|t| (t.span.start.line, t.span.start.column) >= (line, column))
        .map(|i| i + 1)
        .unwrap_or(0)
}
