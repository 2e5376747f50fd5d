//! Brute-force reference computations.
//!
//! Everything here enumerates contexts or worlds directly and shares no code
//! with the scorers it is used to check. Each check produces a
//! [`CheckReport`] whose last line is `PASS <property>` or `FAIL <property>`.

mod nilsson;

pub use nilsson::{
    verify_nilsson, GroundRule, NilssonContext, NilssonInstance, MAX_BASE_ATOMS, MAX_CONTEXTS, MAX_RULES,
};

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::circuit::Circuit;
use crate::context::{ContextDistribution, RuleContextMatrix};
use crate::rules::RuleId;
use crate::rulesets::RulesetCollection;
use crate::scoring::{pc3_probability, upper_bound, ScoringError};

/// Slack allowed when comparing probabilities in the checks.
pub const CHECK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance exceeds size caps: {0}")]
    TooLarge(String),
    #[error("malformed instance: {0}")]
    Malformed(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub property: String,
    pub passed: bool,
    pub details: Vec<String>,
}

impl CheckReport {
    fn new(property: &str, passed: bool, details: Vec<String>) -> Self {
        CheckReport {
            property: property.to_string(),
            passed,
            details,
        }
    }

    /// The machine-readable status line.
    pub fn status_line(&self) -> String {
        format!("{} {}", if self.passed { "PASS" } else { "FAIL" }, self.property)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.details {
            writeln!(f, "  {d}")?;
        }
        write!(f, "{}", self.status_line())
    }
}

fn active_sets(matrix: &RuleContextMatrix) -> Vec<HashSet<u32>> {
    matrix
        .columns()
        .iter()
        .map(|col| col.iter().map(|r| r.0).collect())
        .collect()
}

fn ids(rules: &[RuleId]) -> HashSet<u32> {
    rules.iter().map(|r| r.0).collect()
}

/// Mass of the contexts that activate at least one of `entailing`.
pub fn oracle_query_prob(matrix: &RuleContextMatrix, dist: &ContextDistribution, entailing: &[RuleId]) -> f64 {
    let entailing = ids(entailing);
    active_sets(matrix)
        .iter()
        .enumerate()
        .filter(|(_, active)| !active.is_disjoint(&entailing))
        .fold(0.0, |acc, (c, _)| acc + dist.weight(c))
}

/// Mass of the contexts that activate none of `rules`.
fn mass_activating_none(matrix: &RuleContextMatrix, dist: &ContextDistribution, rules: &[RuleId]) -> f64 {
    let rules = ids(rules);
    active_sets(matrix)
        .iter()
        .enumerate()
        .filter(|(_, active)| active.is_disjoint(&rules))
        .fold(0.0, |acc, (c, _)| acc + dist.weight(c))
}

/// Checks that the mass of contexts whose active set lies inside `rules`
/// does not exceed the mass of contexts activating every rule in `rules`.
pub fn verify_prop1(matrix: &RuleContextMatrix, dist: &ContextDistribution, rules: &[RuleId]) -> CheckReport {
    let set = ids(rules);
    let mut contained = 0.0;
    let mut covering = 0.0;
    for (c, active) in active_sets(matrix).iter().enumerate() {
        if active.is_subset(&set) {
            contained += dist.weight(c);
        }
        if set.is_subset(active) {
            covering += dist.weight(c);
        }
    }
    let passed = contained <= covering + CHECK_TOLERANCE;
    let mut details = vec![format!(
        "R = {:?}: contained-in-R mass {contained}, activates-all-of-R mass {covering}",
        sorted(rules)
    )];
    if !passed {
        details.push("counterexample: contained mass exceeds the marginal".into());
    }
    CheckReport::new("contained-set-bound", passed, details)
}

/// Checks `P(q) = 1 - mass of contexts activating no entailing rule`.
pub fn verify_prop2(matrix: &RuleContextMatrix, dist: &ContextDistribution, entailing: &[RuleId]) -> CheckReport {
    let direct = oracle_query_prob(matrix, dist, entailing);
    let complement = 1.0 - mass_activating_none(matrix, dist, entailing);
    let passed = (direct - complement).abs() <= CHECK_TOLERANCE;
    CheckReport::new(
        "complement-identity",
        passed,
        vec![format!(
            "entailing {:?}: direct {direct}, complement {complement}",
            sorted(entailing)
        )],
    )
}

/// Checks that the set-based lower bound and the disjoint-set upper bound
/// computed by the scorers enclose the enumerated query probability.
pub fn verify_sandwich(
    matrix: &RuleContextMatrix,
    dist: &ContextDistribution,
    circuit: &Circuit,
    collection: &RulesetCollection,
    entailing: &[RuleId],
) -> Result<CheckReport, OracleError> {
    let index = collection.set_index(matrix.n_rules());
    let lower = pc3_probability(entailing, collection, &index)?;
    let upper = upper_bound(entailing, collection, circuit)?;
    let exact = oracle_query_prob(matrix, dist, entailing);
    let passed = lower <= exact + CHECK_TOLERANCE && exact <= upper + CHECK_TOLERANCE;
    Ok(CheckReport::new(
        "bound-sandwich",
        passed,
        vec![format!(
            "entailing {:?}: lower {lower} <= exact {exact} <= upper {upper}",
            sorted(entailing)
        )],
    ))
}

fn sorted(rules: &[RuleId]) -> Vec<u32> {
    let mut v: Vec<u32> = rules.iter().map(|r| r.0).collect();
    v.sort_unstable();
    v
}
