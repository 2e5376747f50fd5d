//! Rule/context association matrix.
//!
//! Every training triple is one context; its column lists the rules that
//! explain it by abduction. Columns are stored sparsely as sorted rule-id
//! lists. The empirical distribution over contexts gives the exact marginals
//! used throughout as ground truth.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

use crate::rules::{abduce_rules, RuleId, RuleProgram};
use crate::store::{EntityId, RelationId, Triple, TripleStore, Vocabulary};

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("context {context}: {message}")]
    InvalidColumn { context: usize, message: String },
    #[error("invalid context weights: {0}")]
    InvalidWeights(String),
    #[error("matrix file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleContextMatrix {
    n_rules: usize,
    columns: Vec<Vec<RuleId>>,
    provenance: Vec<Triple>,
}

impl RuleContextMatrix {
    /// Validates and wraps raw columns. `provenance` is either empty or has
    /// one triple per column.
    pub fn new(n_rules: usize, columns: Vec<Vec<RuleId>>, provenance: Vec<Triple>) -> Result<Self, ContextError> {
        for (c, col) in columns.iter().enumerate() {
            if col.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ContextError::InvalidColumn {
                    context: c,
                    message: "active rule ids must be strictly increasing".into(),
                });
            }
            if let Some(r) = col.iter().find(|r| r.index() >= n_rules) {
                return Err(ContextError::InvalidColumn {
                    context: c,
                    message: format!("rule id {r} out of range for {n_rules} rules"),
                });
            }
        }
        if !provenance.is_empty() && provenance.len() != columns.len() {
            return Err(ContextError::InvalidColumn {
                context: provenance.len().min(columns.len()),
                message: format!("{} provenance triples for {} contexts", provenance.len(), columns.len()),
            });
        }
        Ok(RuleContextMatrix {
            n_rules,
            columns,
            provenance,
        })
    }

    /// Convenience constructor from unsorted id lists; sorts and dedups.
    pub fn from_sets(n_rules: usize, sets: &[Vec<u32>]) -> Result<Self, ContextError> {
        let columns = sets
            .iter()
            .map(|s| {
                let mut col: Vec<RuleId> = s.iter().map(|&r| RuleId(r)).collect();
                col.sort_unstable();
                col.dedup();
                col
            })
            .collect();
        Self::new(n_rules, columns, Vec::new())
    }

    pub fn n_rules(&self) -> usize {
        self.n_rules
    }

    pub fn n_contexts(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<RuleId>] {
        &self.columns
    }

    pub fn column(&self, context: usize) -> &[RuleId] {
        &self.columns[context]
    }

    pub fn provenance(&self) -> &[Triple] {
        &self.provenance
    }

    pub fn is_active(&self, context: usize, rule: RuleId) -> bool {
        self.columns[context].binary_search(&rule).is_ok()
    }

    /// Number of contexts each rule is active in.
    pub fn rule_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_rules];
        for col in &self.columns {
            for r in col {
                counts[r.index()] += 1;
            }
        }
        counts
    }

    /// Distinct columns with their multiplicities, in order of first occurrence.
    pub fn distinct_columns(&self) -> Vec<(&[RuleId], usize)> {
        let mut index: HashMap<&[RuleId], usize> = HashMap::new();
        let mut out: Vec<(&[RuleId], usize)> = Vec::new();
        for col in &self.columns {
            match index.get(col.as_slice()) {
                Some(&i) => out[i].1 += 1,
                None => {
                    index.insert(col.as_slice(), out.len());
                    out.push((col.as_slice(), 1));
                }
            }
        }
        out
    }

    /// Serializes to the line-oriented matrix format. Provenance triples are
    /// written by name.
    pub fn to_text(&self, entities: &Vocabulary, relations: &Vocabulary) -> String {
        let mut s = String::new();
        writeln!(s, "{}\t{}", self.n_rules, self.columns.len()).unwrap();
        for (c, col) in self.columns.iter().enumerate() {
            let ids: Vec<String> = col.iter().map(|r| r.0.to_string()).collect();
            writeln!(s, "{c}\t{}", ids.join(" ")).unwrap();
        }
        s.push_str("#provenance\n");
        for (c, t) in self.provenance.iter().enumerate() {
            writeln!(
                s,
                "{c}\t{}\t{}\t{}",
                entities.name(t.head.0).unwrap_or("?"),
                relations.name(t.relation.0).unwrap_or("?"),
                entities.name(t.tail.0).unwrap_or("?"),
            )
            .unwrap();
        }
        s
    }

    /// Parses the format written by [`to_text`](Self::to_text).
    pub fn from_text(text: &str, entities: &Vocabulary, relations: &Vocabulary) -> Result<Self, ContextError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, message: String| ContextError::Parse { line, message };
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let (n_rules, n_contexts) = header
            .split_once('\t')
            .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
            .ok_or_else(|| err(1, format!("expected n_rules<TAB>n_contexts, got {header:?}")))?;

        let mut columns = Vec::with_capacity(n_contexts);
        for expected in 0..n_contexts {
            let (no, line) = lines
                .next()
                .ok_or_else(|| err(expected + 2, format!("missing column for context {expected}")))?;
            let (idx, ids) = line
                .split_once('\t')
                .ok_or_else(|| err(no, "expected context<TAB>rule ids".into()))?;
            if idx.parse::<usize>().ok() != Some(expected) {
                return Err(err(no, format!("expected context index {expected}, got {idx:?}")));
            }
            let col = ids
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<u32>().map(RuleId))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(no, format!("bad rule id: {e}")))?;
            columns.push(col);
        }

        let mut provenance = Vec::new();
        match lines.next() {
            Some((_, "#provenance")) => {}
            Some((no, other)) => return Err(err(no, format!("expected #provenance, got {other:?}"))),
            None => return Err(err(n_contexts + 2, "missing #provenance section".into())),
        }
        for (no, line) in lines {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 || fields[0].parse::<usize>().ok() != Some(provenance.len()) {
                return Err(err(no, format!("bad provenance line {line:?}")));
            }
            let entity = |n: &str| {
                entities
                    .get(n)
                    .map(EntityId)
                    .ok_or_else(|| err(no, format!("unknown entity {n:?}")))
            };
            let relation = relations
                .get(fields[2])
                .map(RelationId)
                .ok_or_else(|| err(no, format!("unknown relation {:?}", fields[2])))?;
            provenance.push(Triple::new(entity(fields[1])?, relation, entity(fields[3])?));
        }
        Self::new(n_rules, columns, provenance)
    }
}

/// One context per training triple; column = rules that explain the triple.
/// Columns are computed in parallel and kept in store order.
pub fn build_matrix(program: &RuleProgram, train: &TripleStore) -> RuleContextMatrix {
    let columns: Vec<Vec<RuleId>> = train
        .triples()
        .par_iter()
        .map(|t| abduce_rules(t, program, train))
        .collect();
    RuleContextMatrix {
        n_rules: program.len(),
        columns,
        provenance: train.triples().to_vec(),
    }
}

/// Probability weights over contexts.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextDistribution {
    weights: Vec<f64>,
}

impl ContextDistribution {
    pub fn uniform(n_contexts: usize) -> Self {
        ContextDistribution {
            weights: vec![1.0 / n_contexts as f64; n_contexts],
        }
    }

    pub fn from_weights(weights: Vec<f64>) -> Result<Self, ContextError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ContextError::InvalidWeights(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ContextError::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        Ok(ContextDistribution { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, context: usize) -> f64 {
        self.weights[context]
    }
}

fn is_subset(small: &[RuleId], large: &[RuleId]) -> bool {
    let mut it = large.iter();
    small.iter().all(|x| it.by_ref().any(|y| y == x))
}

fn sorted(set: &[RuleId]) -> Vec<RuleId> {
    let mut v = set.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Mass of the contexts that activate every rule in `active`.
pub fn exact_marginal(matrix: &RuleContextMatrix, dist: &ContextDistribution, active: &[RuleId]) -> f64 {
    let active = sorted(active);
    matrix
        .columns
        .iter()
        .zip(&dist.weights)
        .filter(|(col, _)| is_subset(&active, col))
        .fold(0.0, |acc, (_, w)| acc + w)
}

/// Mass of the contexts whose whole active set lies inside `rules`.
pub fn lower_bound_marginal(matrix: &RuleContextMatrix, dist: &ContextDistribution, rules: &[RuleId]) -> f64 {
    let rules = sorted(rules);
    matrix
        .columns
        .iter()
        .zip(&dist.weights)
        .filter(|(col, _)| is_subset(col, &rules))
        .fold(0.0, |acc, (_, w)| acc + w)
}
