//! Filtered ranking metrics over prediction files.
//!
//! Each test triple contributes two queries (head and tail). The rank of the
//! true entity counts every listed competitor whose score is at least the
//! truth's score, except competitors that form a known triple in one of the
//! filter stores. Ties therefore count against the truth.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::rules::Direction;
use crate::scoring::{read_predictions, PredictionBlock, Query, ScoringError};
use crate::store::{EntityId, TripleStore, Vocabulary};

/// Cut-off for the reciprocal rank.
pub const MRR_K: usize = 1000;

pub const CSV_HEADER: &str = "dataset,method,top_n,hits1,hits3,hits10,mrr";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no test queries to evaluate")]
    EmptyTestSet,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Predictions {
        path: PathBuf,
        #[source]
        source: ScoringError,
    },
    #[error("duplicate sweep entry {dataset}/{method}/{top_n}")]
    Duplicate {
        dataset: String,
        method: String,
        top_n: usize,
    },
}

/// Filtered, pessimistic rank of `query.truth` in `candidates` (sorted by
/// score, descending), or `None` if the truth is not listed.
pub fn rank_of_truth(candidates: &[(EntityId, f64)], query: &Query, filters: &[&TripleStore]) -> Option<usize> {
    let truth_score = candidates.iter().find(|(e, _)| *e == query.truth)?.1;
    let known = |e: EntityId| filters.iter().any(|s| s.contains(&query.pattern.complete(e)));
    let ahead = candidates
        .iter()
        .filter(|(e, s)| *e != query.truth && *s >= truth_score && !known(*e))
        .count();
    Some(ahead + 1)
}

/// Ranks of all queries in `blocks`: head query then tail query per triple.
pub fn block_ranks(blocks: &[PredictionBlock], filters: &[&TripleStore]) -> Vec<Option<usize>> {
    blocks
        .iter()
        .flat_map(|b| {
            [
                rank_of_truth(&b.heads, &Query::from_triple(&b.triple, Direction::Head), filters),
                rank_of_truth(&b.tails, &Query::from_triple(&b.triple, Direction::Tail), filters),
            ]
        })
        .collect()
}

pub fn hits_at_k(ranks: &[Option<usize>], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if ranks.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let hits = ranks.iter().filter(|r| matches!(r, Some(r) if *r <= k)).count();
    Ok(hits as f64 / ranks.len() as f64)
}

pub fn mrr_at_k(ranks: &[Option<usize>], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if ranks.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let total: f64 = ranks
        .iter()
        .map(|r| match r {
            Some(r) if *r <= k => 1.0 / *r as f64,
            _ => 0.0,
        })
        .sum();
    Ok(total / ranks.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub dataset: String,
    pub method: String,
    pub top_n: usize,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub mrr: f64,
    pub queries: usize,
}

impl EvalRow {
    pub fn from_ranks(dataset: &str, method: &str, top_n: usize, ranks: &[Option<usize>]) -> Result<Self, EvalError> {
        Ok(EvalRow {
            dataset: dataset.to_string(),
            method: method.to_string(),
            top_n,
            hits1: hits_at_k(ranks, 1)?,
            hits3: hits_at_k(ranks, 3)?,
            hits10: hits_at_k(ranks, 10)?,
            mrr: mrr_at_k(ranks, MRR_K)?,
            queries: ranks.len(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub dataset: String,
    pub method: String,
    pub top_n: usize,
    pub path: PathBuf,
}

/// Evaluates one prediction file.
pub fn evaluate_file(
    path: &Path,
    entities: &Vocabulary,
    relations: &Vocabulary,
    filters: &[&TripleStore],
) -> Result<Vec<Option<usize>>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let blocks = read_predictions(&text, entities, relations).map_err(|source| EvalError::Predictions {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(block_ranks(&blocks, filters))
}

/// One result per entry, in entry order. A failing entry (missing file,
/// parse error, repeated key) yields an error without stopping the others.
pub fn sweep(
    entries: &[SweepEntry],
    entities: &Vocabulary,
    relations: &Vocabulary,
    filters: &[&TripleStore],
) -> Vec<Result<EvalRow, EvalError>> {
    let mut seen = HashSet::new();
    entries
        .iter()
        .map(|e| {
            if !seen.insert((e.dataset.clone(), e.method.clone(), e.top_n)) {
                return Err(EvalError::Duplicate {
                    dataset: e.dataset.clone(),
                    method: e.method.clone(),
                    top_n: e.top_n,
                });
            }
            let ranks = evaluate_file(&e.path, entities, relations, filters)?;
            EvalRow::from_ranks(&e.dataset, &e.method, e.top_n, &ranks)
        })
        .collect()
}

pub fn to_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6}",
            r.dataset, r.method, r.top_n, r.hits1, r.hits3, r.hits10, r.mrr
        )
        .unwrap();
    }
    out
}
