//! Natural-language-to-SQL engine.
//!
//! The offline half ([`schema`], [`retrieval`]) profiles a database, derives
//! its key graph, writes model-generated descriptions and builds a vector
//! index over every column. The online half ([`orchestrator`], [`generator`])
//! answers one question at a time with a ledger-driven state machine that
//! validates every candidate by parsing, guarding and executing it
//! ([`sql`]). [`eval`] runs benchmark suites against the whole pipeline.

pub mod config;
pub mod eval;
pub mod generator;
pub mod llm;
pub mod orchestrator;
pub mod prompts;
pub mod retrieval;
pub mod schema;
pub mod sql;
pub mod tokens;
pub mod tools;

pub use ledgersql_proto as proto;
