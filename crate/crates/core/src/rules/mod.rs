//! Horn rules in the AnyBURL dialect: parsing, filtering, grounding and
//! abduction against a [`TripleStore`](crate::store::TripleStore).

mod ground;
mod parse;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::store::{EntityId, RelationId};

pub use ground::{abduce_rules, predict_candidates, Direction, QueryPattern};
pub use parse::{parse_rule_file, parse_rules};

/// Longest rule body accepted by the parser.
pub const MAX_BODY_LEN: usize = 3;

#[derive(Debug, Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleId(pub u32);

impl RuleId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A single uppercase letter.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash)]
pub struct Variable(u8);

impl Variable {
    pub fn new(c: char) -> Option<Variable> {
        c.is_ascii_uppercase().then(|| Variable(c as u8 - b'A'))
    }

    pub fn slot(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> char {
        (b'A' + self.0) as char
    }
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Variable),
    Const(EntityId),
}

impl Term {
    pub fn var(self) -> Option<Variable> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub relation: RelationId,
    pub subject: Term,
    pub object: Term,
}

impl Atom {
    pub fn vars(&self) -> impl Iterator<Item = Variable> {
        [self.subject.var(), self.object.var()].into_iter().flatten()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub id: RuleId,
    /// Id of this rule in the program it was parsed into (the file line index
    /// among rule lines); kept across filtering.
    pub origin: RuleId,
    pub head: Atom,
    pub body: Vec<Atom>,
    pub confidence: f64,
    pub support: u64,
    pub body_groundings: u64,
    /// Rule string as written in the source file.
    pub text: String,
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: rule rejected: {message}")]
    Rejected { line: usize, message: String },
    #[error("no rule satisfies confidence >= {min_confidence} and support >= {min_support}")]
    EmptyProgram { min_confidence: f64, min_support: u64 },
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
    #[error("rule {rule} has head relation {rule_relation:?}, query asks for {query_relation:?}")]
    RelationMismatch {
        rule: RuleId,
        rule_relation: RelationId,
        query_relation: RelationId,
    },
}

/// An ordered set of rules with dense ids `0..len`.
#[derive(Debug, Clone, Default)]
pub struct RuleProgram {
    rules: Vec<Rule>,
    by_head: HashMap<RelationId, Vec<RuleId>>,
}

impl RuleProgram {
    /// Builds a program, renumbering rule ids densely in the given order.
    pub fn new(rules: Vec<Rule>) -> Self {
        let mut rules = rules;
        let mut by_head: HashMap<RelationId, Vec<RuleId>> = HashMap::new();
        for (i, rule) in rules.iter_mut().enumerate() {
            rule.id = RuleId(i as u32);
            by_head.entry(rule.head.relation).or_default().push(rule.id);
        }
        RuleProgram { rules, by_head }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, id: RuleId) -> Option<&Rule> {
        self.rules.get(id.index())
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id.index()]
    }

    /// Rules whose head relation is `relation`, ascending by id.
    pub fn with_head(&self, relation: RelationId) -> &[RuleId] {
        self.by_head.get(&relation).map_or(&[], Vec::as_slice)
    }

    /// Keeps rules with `confidence >= min_confidence` and
    /// `support >= min_support`, assigning new dense ids. `origin` is preserved.
    pub fn filter(&self, min_confidence: f64, min_support: u64) -> Result<RuleProgram, RuleError> {
        if !min_confidence.is_finite() || min_confidence < 0.0 {
            return Err(RuleError::InvalidThreshold(format!(
                "min-confidence must be a finite non-negative number, got {min_confidence}"
            )));
        }
        let kept: Vec<Rule> = self
            .rules
            .iter()
            .filter(|r| r.confidence >= min_confidence && r.support >= min_support)
            .cloned()
            .collect();
        if kept.is_empty() {
            return Err(RuleError::EmptyProgram {
                min_confidence,
                min_support,
            });
        }
        Ok(RuleProgram::new(kept))
    }

    /// Rule ids ordered by confidence descending, then support descending,
    /// then id.
    pub fn confidence_order(&self) -> Vec<RuleId> {
        let mut ids: Vec<RuleId> = self.rules.iter().map(|r| r.id).collect();
        ids.sort_by(|&a, &b| {
            let (ra, rb) = (self.rule(a), self.rule(b));
            rb.confidence
                .total_cmp(&ra.confidence)
                .then(rb.support.cmp(&ra.support))
                .then(a.cmp(&b))
        });
        ids
    }
}

/// Free-function form of [`RuleProgram::filter`].
pub fn filter_rules(program: &RuleProgram, min_confidence: f64, min_support: u64) -> Result<RuleProgram, RuleError> {
    program.filter(min_confidence, min_support)
}
