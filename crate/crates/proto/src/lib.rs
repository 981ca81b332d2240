//! Plain data types shared between the ledgersql engine, the HTTP service and
//! its clients.
//!
//! Everything in here is serializable and free of behaviour beyond small
//! accessors. The engine (`ledgersql-core`) owns the logic that produces these
//! values; the service ships them over HTTP as JSON; the client reads them back.

pub mod api;
pub mod session;
pub mod table;
pub mod trace;

pub use api::{
    AskRequest, AskResponse, AttemptSummary, ConfigOverrides, DatabaseInfo, ErrorBody, ErrorDetail,
    FewShotExample, Health, API_VERSION,
};
pub use session::{
    Action, AttemptRecord, BlockedClass, CandidateSql, ExecErrorKind, ExecutionOutcome, FactSheet,
    GuardrailVerdict, HeuristicReport, JoinPath, Mode, ParseOutcome, SessionOutcome, SqlOrigin,
    SubQuestion, SyntaxDiagnostic, Verdict,
};
pub use table::{ResultTable, Scalar};
pub use trace::{SessionTrace, TraceEvent, TraceHeader, TRACE_FORMAT, TRACE_VERSION};
