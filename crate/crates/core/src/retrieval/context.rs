use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{extract_entities, retrieve, RetrievalError, SchemaIndex, ScoredColumn, DEFAULT_TOP_K};
use crate::llm::{Embedder, ModelSettings, ProviderHandle};
use crate::schema::{render_ddl, ColumnRef, EnrichedSchema, KeyGraph};
use crate::tokens;

#[derive(Debug, Clone)]
pub struct ContextOptions {
    pub budget_tokens: usize,
    pub k: usize,
    pub model: ModelSettings,
}

impl Default for ContextOptions {
    fn default() -> Self {
        Self {
            budget_tokens: 100_000,
            k: DEFAULT_TOP_K,
            model: ModelSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaContext {
    pub ddl_text: String,
    pub included_columns: BTreeSet<ColumnRef>,
    pub bypass_used: bool,
    pub token_estimate: usize,
    /// Empty when the bypass was taken.
    pub entities: Vec<String>,
    pub retrieved: Vec<ScoredColumn>,
}

fn shortest_path<'a>(adjacency: &BTreeMap<&'a str, Vec<(&'a str, ColumnRef, ColumnRef)>>, from: &'a str, to: &'a str) -> Option<Vec<(ColumnRef, ColumnRef)>> {
    let mut previous: BTreeMap<&str, (&str, &ColumnRef, &ColumnRef)> = BTreeMap::new();
    let mut seen: BTreeSet<&str> = [from].into();
    let mut queue = VecDeque::from([from]);
    while let Some(t) = queue.pop_front() {
        if t == to {
            let mut path = Vec::new();
            let mut cur = to;
            while let Some((prev, a, b)) = previous.get(cur) {
                path.push(((*a).clone(), (*b).clone()));
                cur = prev;
            }
            return Some(path);
        }
        for (next, a, b) in adjacency.get(t).into_iter().flatten() {
            if seen.insert(next) {
                previous.insert(next, (t, a, b));
                queue.push_back(next);
            }
        }
    }
    None
}

/// Key columns needed to join `tables`: the primary keys of every table on
/// the way plus both endpoints of each foreign key edge on the shortest
/// undirected path between every pair.
pub fn join_path_keys(keys: &KeyGraph, tables: &BTreeSet<String>) -> BTreeSet<ColumnRef> {
    let mut adjacency: BTreeMap<&str, Vec<(&str, ColumnRef, ColumnRef)>> = BTreeMap::new();
    for fk in &keys.foreign_keys {
        let from = ColumnRef::new(&fk.from_table, &fk.from_column);
        let to = ColumnRef::new(&fk.to_table, &fk.to_column);
        adjacency.entry(&fk.from_table).or_default().push((&fk.to_table, from.clone(), to.clone()));
        adjacency.entry(&fk.to_table).or_default().push((&fk.from_table, from, to));
    }
    for edges in adjacency.values_mut() {
        edges.sort();
    }

    let mut out = BTreeSet::new();
    let mut touched: BTreeSet<String> = tables.clone();
    let list: Vec<&String> = tables.iter().collect();
    for (i, a) in list.iter().enumerate() {
        for b in &list[i + 1..] {
            if let Some(path) = shortest_path(&adjacency, a, b) {
                for (x, y) in path {
                    touched.insert(x.table.clone());
                    touched.insert(y.table.clone());
                    out.insert(x);
                    out.insert(y);
                }
            }
        }
    }
    for t in &touched {
        for c in keys.primary_key(t) {
            out.insert(ColumnRef::new(t, c));
        }
    }
    out
}

fn context_for(schema: &EnrichedSchema, retrieved: &[ScoredColumn]) -> Result<(String, BTreeSet<ColumnRef>), RetrievalError> {
    let mut selection: BTreeSet<ColumnRef> = retrieved.iter().map(ScoredColumn::column_ref).collect();
    let tables: BTreeSet<String> = retrieved.iter().map(|s| s.table.clone()).collect();
    selection.extend(join_path_keys(&schema.keys, &tables));
    let ddl = render_ddl(schema, Some(&selection))?;
    Ok((ddl, selection))
}

/// Full DDL when it fits in the budget; otherwise the DDL of the retrieved
/// columns plus their join keys, dropping the lowest-ranked columns until it
/// fits.
pub fn assemble_context(
    schema: &EnrichedSchema,
    index: &SchemaIndex,
    question: &str,
    opts: &ContextOptions,
    provider: &ProviderHandle,
    embedder: &dyn Embedder,
) -> Result<SchemaContext, RetrievalError> {
    let full = render_ddl(schema, None)?;
    let full_estimate = tokens::estimate(&full);
    if full_estimate <= opts.budget_tokens {
        return Ok(SchemaContext {
            ddl_text: full,
            included_columns: schema.all_columns().collect(),
            bypass_used: true,
            token_estimate: full_estimate,
            entities: Vec::new(),
            retrieved: Vec::new(),
        });
    }

    let entities = extract_entities(question, provider, &opts.model);
    let retrieved = retrieve(index, &entities, opts.k, embedder)?;
    let mut needed = full_estimate;
    for n in (1..=retrieved.len()).rev() {
        let (ddl, selection) = context_for(schema, &retrieved[..n])?;
        let estimate = tokens::estimate(&ddl);
        if estimate <= opts.budget_tokens {
            return Ok(SchemaContext {
                ddl_text: ddl,
                included_columns: selection,
                bypass_used: false,
                token_estimate: estimate,
                entities,
                retrieved: retrieved[..n].to_vec(),
            });
        }
        needed = estimate;
    }
    Err(RetrievalError::BudgetTooSmall {
        budget: opts.budget_tokens,
        needed,
    })
}
