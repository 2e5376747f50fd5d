//! Candidate scoring for link-prediction queries and the prediction file.
//!
//! Candidates come only from rules that fire for a query. Each scorer turns
//! the firing rules of a candidate into one number:
//!
//! * PC1: largest singleton marginal among the firing rules.
//! * PC2: `1 - P(all firing rules inactive)`.
//! * PC3: largest recorded marginal among rule sets that contain a firing rule.
//! * baseline: largest rule confidence; entities tied on it are ordered by
//!   their remaining distinct confidences, then by id.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError};
use crate::rules::{predict_candidates, Direction, QueryPattern, RuleError, RuleId, RuleProgram};
use crate::rulesets::RulesetCollection;
use crate::store::{EntityId, Triple, TripleStore, Vocabulary};

/// Default number of candidates kept per query.
pub const DEFAULT_TOP_K: usize = 1000;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("top-n must be at least 1")]
    InvalidTopN,
    #[error("rule {0} is not covered by the rule set collection")]
    Uncovered(RuleId),
    #[error("prediction file line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A test query: one side of a test triple is hidden. The hidden entity is
/// kept for evaluation only; scorers see just the pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Query {
    pub pattern: QueryPattern,
    pub truth: EntityId,
}

impl Query {
    pub fn from_triple(triple: &Triple, direction: Direction) -> Self {
        match direction {
            Direction::Head => Query {
                pattern: QueryPattern::head(triple.tail, triple.relation),
                truth: triple.head,
            },
            Direction::Tail => Query {
                pattern: QueryPattern::tail(triple.head, triple.relation),
                truth: triple.tail,
            },
        }
    }
}

/// Candidate entity → ascending ids of the rules predicting it.
pub type Firings = BTreeMap<EntityId, Vec<RuleId>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub entity: EntityId,
    pub score: f64,
    pub rules: Vec<RuleId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedPrediction {
    pub pattern: QueryPattern,
    pub candidates: Vec<Candidate>,
}

impl RankedPrediction {
    /// Sorts by score descending, then entity id, and keeps the first `k`.
    fn ranked(pattern: QueryPattern, mut candidates: Vec<Candidate>, k: usize) -> Self {
        candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.entity.cmp(&b.entity)));
        candidates.truncate(k);
        RankedPrediction { pattern, candidates }
    }
}

/// Membership mask over rule ids.
#[derive(Debug, Clone)]
pub struct ActiveRules(Vec<bool>);

impl ActiveRules {
    pub fn new(n_rules: usize, rules: &[RuleId]) -> Self {
        let mut mask = vec![false; n_rules];
        for r in rules {
            mask[r.index()] = true;
        }
        ActiveRules(mask)
    }

    pub fn all(n_rules: usize) -> Self {
        ActiveRules(vec![true; n_rules])
    }

    pub fn contains(&self, rule: RuleId) -> bool {
        self.0.get(rule.index()).copied().unwrap_or(false)
    }
}

/// For each candidate, the active rules with the query's head relation that
/// predict it in `train`.
pub fn collect_firings(
    pattern: &QueryPattern,
    program: &RuleProgram,
    active: &ActiveRules,
    train: &TripleStore,
) -> Result<Firings, ScoringError> {
    let mut firings = Firings::new();
    for &id in program.with_head(pattern.relation) {
        if !active.contains(id) {
            continue;
        }
        for e in predict_candidates(program.rule(id), pattern, train)? {
            firings.entry(e).or_default().push(id);
        }
    }
    for rules in firings.values_mut() {
        rules.sort_unstable();
    }
    Ok(firings)
}

/// Keeps only the active rules of `firings`, dropping candidates left without any.
pub fn restrict_firings(firings: &Firings, active: &ActiveRules) -> Firings {
    firings
        .iter()
        .filter_map(|(&e, rules)| {
            let kept: Vec<RuleId> = rules.iter().copied().filter(|&r| active.contains(r)).collect();
            (!kept.is_empty()).then_some((e, kept))
        })
        .collect()
}

pub fn score_pc1(pattern: QueryPattern, firings: &Firings, marginals: &[f64], k: usize) -> RankedPrediction {
    let candidates = firings
        .iter()
        .filter(|(_, rules)| !rules.is_empty())
        .map(|(&entity, rules)| Candidate {
            entity,
            score: rules
                .iter()
                .map(|r| marginals[r.index()])
                .fold(f64::NEG_INFINITY, f64::max),
            rules: rules.clone(),
        })
        .collect();
    RankedPrediction::ranked(pattern, candidates, k)
}

/// `1 - P(every rule in `rules` is inactive)`.
pub fn pc2_probability(rules: &[RuleId], circuit: &Circuit) -> Result<f64, CircuitError> {
    let none: Vec<(RuleId, bool)> = rules.iter().map(|&r| (r, false)).collect();
    Ok((1.0 - circuit.query_marginal(&none)?).clamp(0.0, 1.0))
}

pub fn score_pc2(
    pattern: QueryPattern,
    firings: &Firings,
    circuit: &Circuit,
    k: usize,
) -> Result<RankedPrediction, ScoringError> {
    let mut candidates = Vec::with_capacity(firings.len());
    for (&entity, rules) in firings {
        if rules.is_empty() {
            continue;
        }
        candidates.push(Candidate {
            entity,
            score: pc2_probability(rules, circuit)?,
            rules: rules.clone(),
        });
    }
    Ok(RankedPrediction::ranked(pattern, candidates, k))
}

/// Largest recorded marginal among sets holding one of `rules`; `set_index`
/// comes from [`RulesetCollection::set_index`].
pub fn pc3_probability(
    rules: &[RuleId],
    collection: &RulesetCollection,
    set_index: &[Option<usize>],
) -> Result<f64, ScoringError> {
    let mut best = 0.0f64;
    for &r in rules {
        let set = set_index
            .get(r.index())
            .copied()
            .flatten()
            .ok_or(ScoringError::Uncovered(r))?;
        best = best.max(collection.sets[set].marginal);
    }
    Ok(best)
}

pub fn score_pc3(
    pattern: QueryPattern,
    firings: &Firings,
    collection: &RulesetCollection,
    set_index: &[Option<usize>],
    k: usize,
) -> Result<RankedPrediction, ScoringError> {
    let mut candidates = Vec::with_capacity(firings.len());
    for (&entity, rules) in firings {
        if rules.is_empty() {
            continue;
        }
        candidates.push(Candidate {
            entity,
            score: pc3_probability(rules, collection, set_index)?,
            rules: rules.clone(),
        });
    }
    Ok(RankedPrediction::ranked(pattern, candidates, k))
}

/// Diagnostic upper bound on the query probability of a candidate: for every
/// emitted set `S` sharing no rule with `firing`, the firing rules all lie
/// outside `S`, so `P(q) <= 1 - P(every rule outside S is inactive)`. Returns
/// the smallest such bound, or 1 when every set shares a rule with `firing`.
pub fn upper_bound(firing: &[RuleId], collection: &RulesetCollection, circuit: &Circuit) -> Result<f64, ScoringError> {
    let mut firing_mask = vec![false; circuit.n_vars()];
    for r in firing {
        *firing_mask
            .get_mut(r.index())
            .ok_or(CircuitError::UnknownVariable(*r, circuit.n_vars()))? = true;
    }
    let mut bound = 1.0f64;
    for set in &collection.sets {
        if set
            .rules
            .iter()
            .any(|r| firing_mask.get(r.index()).copied().unwrap_or(false))
        {
            continue;
        }
        let mut inside = vec![false; circuit.n_vars()];
        for r in &set.rules {
            inside[r.index()] = true;
        }
        let outside: Vec<(RuleId, bool)> = (0..circuit.n_vars() as u32)
            .filter(|&v| !inside[v as usize])
            .map(|v| (RuleId(v), false))
            .collect();
        let p = 1.0 - circuit.query_marginal(&outside)?;
        bound = bound.min(p.clamp(0.0, 1.0));
    }
    Ok(bound)
}

/// Confidence-ordered top-`n` rules.
pub fn baseline_rules(program: &RuleProgram, top_n: usize) -> Result<Vec<RuleId>, ScoringError> {
    if top_n == 0 {
        return Err(ScoringError::InvalidTopN);
    }
    Ok(program.confidence_order().into_iter().take(top_n).collect())
}

/// Distinct confidences of `rules`, descending.
fn confidence_profile(rules: &[RuleId], program: &RuleProgram) -> Vec<f64> {
    let mut conf: Vec<f64> = rules.iter().map(|&r| program.rule(r).confidence).collect();
    conf.sort_by(|a, b| b.total_cmp(a));
    conf.dedup();
    conf
}

/// Ranks candidates from `firings` (computed with the baseline's top-n rules).
pub fn score_baseline_firings(
    pattern: QueryPattern,
    firings: &Firings,
    program: &RuleProgram,
    k: usize,
) -> RankedPrediction {
    let mut scored: Vec<(Vec<f64>, Candidate)> = firings
        .iter()
        .filter(|(_, rules)| !rules.is_empty())
        .map(|(&entity, rules)| {
            let profile = confidence_profile(rules, program);
            let candidate = Candidate {
                entity,
                score: profile[0],
                rules: rules.clone(),
            };
            (profile, candidate)
        })
        .collect();
    scored.sort_by(|(pa, a), (pb, b)| {
        for (x, y) in pa.iter().zip(pb) {
            match y.total_cmp(x) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        pb.len().cmp(&pa.len()).then(a.entity.cmp(&b.entity))
    });
    scored.truncate(k);
    RankedPrediction {
        pattern,
        candidates: scored.into_iter().map(|(_, c)| c).collect(),
    }
}

pub fn score_baseline(
    pattern: QueryPattern,
    program: &RuleProgram,
    train: &TripleStore,
    top_n: usize,
    k: usize,
) -> Result<RankedPrediction, ScoringError> {
    let active = ActiveRules::new(program.len(), &baseline_rules(program, top_n)?);
    let firings = collect_firings(&pattern, program, &active, train)?;
    Ok(score_baseline_firings(pattern, &firings, program, k))
}

/// Predictions for one test triple: head query then tail query.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBlock {
    pub triple: Triple,
    pub heads: Vec<(EntityId, f64)>,
    pub tails: Vec<(EntityId, f64)>,
}

impl PredictionBlock {
    pub fn new(triple: Triple, heads: &RankedPrediction, tails: &RankedPrediction) -> Self {
        let strip = |p: &RankedPrediction| p.candidates.iter().map(|c| (c.entity, c.score)).collect();
        PredictionBlock {
            triple,
            heads: strip(heads),
            tails: strip(tails),
        }
    }
}

fn write_line(out: &mut String, label: &str, list: &[(EntityId, f64)], entities: &Vocabulary) {
    out.push_str(label);
    out.push_str(": ");
    for (i, (e, s)) in list.iter().enumerate() {
        if i > 0 {
            out.push('\t');
        }
        write!(out, "{}\t{s:.6}", entities.name(e.0).expect("entity in vocabulary")).unwrap();
    }
    out.push('\n');
}

/// Prediction file text: per test triple the triple, a `Heads:` line and a
/// `Tails:` line of entity/score pairs, scores with six decimals.
pub fn write_predictions(blocks: &[PredictionBlock], entities: &Vocabulary, relations: &Vocabulary) -> String {
    let mut out = String::new();
    for b in blocks {
        let name = |e: EntityId| entities.name(e.0).expect("entity in vocabulary");
        writeln!(
            out,
            "{}\t{}\t{}",
            name(b.triple.head),
            relations.name(b.triple.relation.0).expect("relation in vocabulary"),
            name(b.triple.tail)
        )
        .unwrap();
        write_line(&mut out, "Heads", &b.heads, entities);
        write_line(&mut out, "Tails", &b.tails, entities);
    }
    out
}

pub fn read_predictions(
    text: &str,
    entities: &Vocabulary,
    relations: &Vocabulary,
) -> Result<Vec<PredictionBlock>, ScoringError> {
    let err = |line: usize, message: String| ScoringError::Parse { line, message };
    let entity = |line: usize, name: &str| {
        entities
            .get(name)
            .map(EntityId)
            .ok_or_else(|| err(line, format!("unknown entity {name:?}")))
    };
    let list = |line: usize, text: &str, label: &str| -> Result<Vec<(EntityId, f64)>, ScoringError> {
        let rest = text
            .strip_prefix(label)
            .and_then(|t| t.strip_prefix(':'))
            .ok_or_else(|| err(line, format!("expected a {label}: line")))?;
        let rest = rest.strip_prefix(' ').unwrap_or(rest);
        if rest.is_empty() {
            return Ok(Vec::new());
        }
        let fields: Vec<&str> = rest.split('\t').collect();
        if !fields.len().is_multiple_of(2) {
            return Err(err(line, "odd number of entity/score fields".into()));
        }
        fields
            .chunks(2)
            .map(|pair| {
                let score: f64 = pair[1]
                    .parse()
                    .map_err(|_| err(line, format!("bad score {:?}", pair[1])))?;
                Ok((entity(line, pair[0])?, score))
            })
            .collect()
    };
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if !lines.len().is_multiple_of(3) {
        return Err(err(lines.len(), "file does not consist of three-line blocks".into()));
    }
    lines
        .chunks(3)
        .map(|chunk| {
            let (n, triple_line) = chunk[0];
            let fields: Vec<&str> = triple_line.split('\t').collect();
            let [h, r, t] = fields[..] else {
                return Err(err(n, "expected head<TAB>relation<TAB>tail".into()));
            };
            let relation = relations
                .get(r)
                .map(crate::store::RelationId)
                .ok_or_else(|| err(n, format!("unknown relation {r:?}")))?;
            Ok(PredictionBlock {
                triple: Triple::new(entity(n, h)?, relation, entity(n, t)?),
                heads: list(chunk[1].0, chunk[1].1, "Heads")?,
                tails: list(chunk[2].0, chunk[2].1, "Tails")?,
            })
        })
        .collect()
}
