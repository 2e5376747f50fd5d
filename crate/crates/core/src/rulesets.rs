//! Ordered rule subsets derived from a fitted circuit.
//!
//! Singleton collections sort rules by their marginal `P(r = 1)`. Greedy
//! collections partition the rules into walks: each walk starts from the
//! remaining rule with the largest marginal and keeps adding the rule that
//! maximizes the joint marginal of the set, as long as that marginal stays at
//! or above `δ`.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::circuit::Circuit;
use crate::rules::{RuleId, RuleProgram};

#[derive(Debug, Error)]
pub enum RulesetError {
    #[error("threshold must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("circuit covers {circuit} variables but the program has {rules} rules")]
    ScopeMismatch { circuit: usize, rules: usize },
    #[error("ruleset file line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Singleton,
    Greedy { delta: f64 },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Singleton => f.write_str("singleton"),
            Method::Greedy { delta } => write!(f, "greedy(delta={delta})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ruleset {
    /// rules in insertion order
    pub rules: Vec<RuleId>,
    /// `P(every rule in the set is active)`
    pub marginal: f64,
    pub walk: usize,
    /// set marginal after each insertion; empty when read back from text
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RulesetCollection {
    pub method: Method,
    pub sets: Vec<Ruleset>,
    /// number of marginal queries answered by the circuit
    pub query_count: u64,
}

impl RulesetCollection {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Rules of the first `n` sets, in collection order.
    pub fn top_rules(&self, n: usize) -> Vec<RuleId> {
        self.sets.iter().take(n).flat_map(|s| s.rules.iter().copied()).collect()
    }

    /// For every rule id below `n_rules`, the index of the set holding it.
    pub fn set_index(&self, n_rules: usize) -> Vec<Option<usize>> {
        let mut index = vec![None; n_rules];
        for (i, set) in self.sets.iter().enumerate() {
            for r in &set.rules {
                if let Some(slot) = index.get_mut(r.index()) {
                    *slot = Some(i);
                }
            }
        }
        index
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for set in &self.sets {
            let ids: Vec<String> = set.rules.iter().map(|r| r.0.to_string()).collect();
            writeln!(out, "{}\t{}\t{}", set.walk, set.marginal, ids.join(" ")).unwrap();
        }
        writeln!(out, "queries={}", self.query_count).unwrap();
        out
    }

    pub fn from_text(text: &str, method: Method) -> Result<Self, RulesetError> {
        let err = |line: usize, message: String| RulesetError::Parse { line, message };
        let mut sets = Vec::new();
        let mut query_count = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            if query_count.is_some() {
                return Err(err(line_no, "content after the queries= line".into()));
            }
            if let Some(count) = line.strip_prefix("queries=") {
                query_count = Some(
                    count
                        .parse()
                        .map_err(|_| err(line_no, format!("bad query count {count:?}")))?,
                );
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [walk, marginal, ids] = fields[..] else {
                return Err(err(line_no, "expected walk<TAB>marginal<TAB>rule ids".into()));
            };
            let rules = ids
                .split_whitespace()
                .map(|id| {
                    id.parse()
                        .map(RuleId)
                        .map_err(|_| err(line_no, format!("bad rule id {id:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if rules.is_empty() {
                return Err(err(line_no, "empty rule set".into()));
            }
            sets.push(Ruleset {
                rules,
                marginal: marginal
                    .parse()
                    .map_err(|_| err(line_no, format!("bad marginal {marginal:?}")))?,
                walk: walk
                    .parse()
                    .map_err(|_| err(line_no, format!("bad walk index {walk:?}")))?,
                trace: Vec::new(),
            });
        }
        let query_count = query_count.ok_or_else(|| err(text.lines().count(), "missing queries= line".into()))?;
        Ok(RulesetCollection {
            method,
            sets,
            query_count,
        })
    }
}

fn check_scope(circuit: &Circuit, program: &RuleProgram) -> Result<(), RulesetError> {
    if circuit.n_vars() != program.len() {
        return Err(RulesetError::ScopeMismatch {
            circuit: circuit.n_vars(),
            rules: program.len(),
        });
    }
    Ok(())
}

/// Rule ids by singleton marginal, descending; ties by ascending id.
fn marginal_order(marginals: &[f64]) -> Vec<RuleId> {
    let mut order: Vec<RuleId> = (0..marginals.len() as u32).map(RuleId).collect();
    order.sort_by(|a, b| marginals[b.index()].total_cmp(&marginals[a.index()]).then(a.cmp(b)));
    order
}

/// `P(r = 1)` for every rule; counts one query per rule.
pub fn singleton_marginals(circuit: &Circuit) -> Vec<f64> {
    circuit.extension_marginals(&vec![None; circuit.n_vars()])
}

pub fn singleton_rulesets(circuit: &Circuit, program: &RuleProgram) -> Result<RulesetCollection, RulesetError> {
    check_scope(circuit, program)?;
    let marginals = singleton_marginals(circuit);
    let sets = marginal_order(&marginals)
        .into_iter()
        .enumerate()
        .map(|(walk, r)| Ruleset {
            rules: vec![r],
            marginal: marginals[r.index()],
            walk,
            trace: vec![marginals[r.index()]],
        })
        .collect();
    Ok(RulesetCollection {
        method: Method::Singleton,
        sets,
        query_count: program.len() as u64,
    })
}

/// Greedy walks with extension threshold `delta`.
///
/// Candidate extensions of one step are evaluated together from a single
/// upward/downward pass; each candidate still counts as one query. A seed
/// whose own marginal is below `delta` cannot be extended (conjunction
/// marginals only shrink), so its walk ends without candidate queries.
pub fn greedy_rulesets(
    circuit: &Circuit,
    program: &RuleProgram,
    delta: f64,
) -> Result<RulesetCollection, RulesetError> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(RulesetError::InvalidThreshold(delta));
    }
    check_scope(circuit, program)?;
    let n = program.len();
    let marginals = singleton_marginals(circuit);
    let mut queries = n as u64;
    let seeds = marginal_order(&marginals);
    let mut used = vec![false; n];
    let mut remaining = n;
    let mut sets = Vec::new();

    for seed in seeds {
        if used[seed.index()] {
            continue;
        }
        used[seed.index()] = true;
        remaining -= 1;
        let mut rules = vec![seed];
        let mut marginal = marginals[seed.index()];
        let mut trace = vec![marginal];
        let mut evidence = vec![None; n];
        evidence[seed.index()] = Some(true);
        while marginal >= delta && remaining > 0 {
            let joint = circuit.extension_marginals(&evidence);
            queries += remaining as u64;
            let mut best: Option<usize> = None;
            for v in (0..n).filter(|&v| !used[v]) {
                if best.is_none_or(|b| joint[v] > joint[b]) {
                    best = Some(v);
                }
            }
            let best = best.expect("remaining rules exist");
            if joint[best] < delta {
                break;
            }
            used[best] = true;
            remaining -= 1;
            evidence[best] = Some(true);
            rules.push(RuleId(best as u32));
            marginal = joint[best];
            trace.push(marginal);
        }
        log::debug!("walk {}: {} rules, marginal {marginal}", sets.len(), rules.len());
        sets.push(Ruleset {
            rules,
            marginal,
            walk: sets.len(),
            trace,
        });
    }
    Ok(RulesetCollection {
        method: Method::Greedy { delta },
        sets,
        query_count: queries,
    })
}
