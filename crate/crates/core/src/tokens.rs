//! Token estimation used for context budgets.

/// Conservative token estimate: characters / 4, rounded up.
pub fn estimate(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}
