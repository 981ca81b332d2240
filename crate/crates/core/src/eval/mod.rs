//! Benchmark evaluation: BIRD-layout ingestion, gold execution, judge-based
//! result codes, accuracy, latency percentiles, judge alignment and
//! confidence intervals over repeated trials.

mod benchmark;
mod judge;
mod metrics;
mod run;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use benchmark::{database_path, expected_count, load_benchmark, load_overlay, BenchmarkItem, QUESTIONS_FILE};
pub use judge::{judge, judge_prompt, parse_judge_reply, Judgement, JUDGE_MARKER, JUDGE_TEMPLATE};
pub use metrics::{
    accuracy, alignment_metrics, confidence_interval, latency_percentiles, t_critical, AlignmentMetrics,
    ConfidenceInterval,
};
pub use run::{
    render_summary, run_benchmark, ArtifactStore, BenchmarkReport, Clock, DomainSummary, EvalOptions, EvalRecord,
    StepClock, SystemClock, TrialSummary, REPORT_FORMAT, REPORT_VERSION,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("input is empty")]
    EmptyInput,
    #[error("at least two trials are needed, got {0}")]
    TooFewTrials(usize),
    #[error("confidence level must be in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("percentile rank must be in (0, 100], got {0}")]
    InvalidRank(f64),
    #[error("database {database_id} missing at {path}")]
    MissingDatabase { database_id: String, path: String },
    #[error("malformed question file: {0}")]
    MalformedQuestionFile(String),
    #[error("report file is unreadable: {0}")]
    MalformedReport(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("artifact preparation failed for {database_id}: {message}")]
    Artifacts { database_id: String, message: String },
}

/// Judge classification of one generated answer against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResultCode {
    /// Failed execution.
    #[serde(rename = "RES1")]
    Res1,
    /// Executed, incorrect result.
    #[serde(rename = "RES2")]
    Res2,
    /// Executed, correct result.
    #[serde(rename = "RES3")]
    Res3,
    /// Executed, no result.
    #[serde(rename = "RES4")]
    Res4,
    /// Executed, partial match.
    #[serde(rename = "RES5")]
    Res5,
    /// Unexpected result.
    #[serde(rename = "RES6")]
    Res6,
}

impl ResultCode {
    pub const ALL: [ResultCode; 6] = [
        ResultCode::Res1,
        ResultCode::Res2,
        ResultCode::Res3,
        ResultCode::Res4,
        ResultCode::Res5,
        ResultCode::Res6,
    ];

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.get(usize::from(n).checked_sub(1)?).copied()
    }

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    /// Counted as correct: RES3 and RES5.
    pub fn is_correct(self) -> bool {
        matches!(self, ResultCode::Res3 | ResultCode::Res5)
    }
}

impl fmt::Display for ResultCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RES{}", self.number())
    }
}
