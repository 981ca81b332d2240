//! Fixtures shared by the test suites: a toy banking database in the layout
//! of the BIRD `financial` schema, a hand-written gold query set for it, a
//! write-statement corpus, a one-row answer database, a small retrieval corpus, a three-item benchmark
//! directory and provider scripts.

mod answer;
mod bench;
mod corpus;
mod dml;
mod financial;

use std::path::Path;

use sha2::{Digest, Sha256};

pub use answer::{write_answer_db, ANSWER_ESCALATION_SCRIPT, ANSWER_SCRIPT};
pub use bench::{write_toy_benchmark, TOY_BENCH_SCRIPT, TOY_ITEMS};
pub use corpus::{write_retrieval_corpus, CORPUS_COLUMNS};
pub use dml::{dml_corpus, DmlCase, DML_VARIANTS, DML_VERBS};
pub use financial::{write_financial_db, FINANCIAL_COLUMNS, FINANCIAL_GOLD, FINANCIAL_TABLES};

/// Hex sha256 of a file's bytes.
pub fn file_sha256(path: &Path) -> String {
    let bytes = std::fs::read(path).expect("readable fixture file");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Small deterministic generator; fixtures must not depend on a RNG crate's
/// stream stability.
pub(crate) struct Lcg(u64);

impl Lcg {
    pub(crate) fn new(seed: u64) -> Self {
        Self(seed ^ 0x9e37_79b9_7f4a_7c15)
    }

    pub(crate) fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
        self.0 >> 33
    }

    /// Uniform in `lo..=hi`.
    pub(crate) fn range(&mut self, lo: i64, hi: i64) -> i64 {
        lo + (self.next() % (hi - lo + 1) as u64) as i64
    }

    pub(crate) fn pick<'a>(&mut self, items: &[&'a str]) -> &'a str {
        items[self.next() as usize % items.len()]
    }

    pub(crate) fn date(&mut self, y0: i64, y1: i64) -> String {
        format!("{}-{:02}-{:02}", self.range(y0, y1), self.range(1, 12), self.range(1, 28))
    }
}
