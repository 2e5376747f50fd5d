//! World enumeration for the probabilistic program built from a rule-context
//! matrix.
//!
//! Atoms are numbered base atoms first, then one activation atom `mu_r` per
//! rule, then one context atom `nu_c` per context. The probability-one part of
//! the program consists of the facts, `head <- body, mu_r` for every rule,
//! `mu_r <- nu_c` for every rule active in context `c`, and
//! `not nu_d <- nu_c` for every pair of distinct contexts. Each `nu_c` is a
//! fact with probability `P(c)`.
//!
//! The check builds one interpretation by putting the mass of each context on
//! its minimal model, then compares it against entailment computed from the
//! full model enumeration.

use rand::Rng;

use super::{CheckReport, OracleError, CHECK_TOLERANCE};

pub const MAX_BASE_ATOMS: usize = 10;
pub const MAX_CONTEXTS: usize = 4;
pub const MAX_RULES: usize = 5;

/// A ground rule over base atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundRule {
    pub head: usize,
    pub body: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NilssonContext {
    /// indices into [`NilssonInstance::rules`]
    pub active: Vec<usize>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NilssonInstance {
    pub n_base: usize,
    pub facts: Vec<usize>,
    pub rules: Vec<GroundRule>,
    pub contexts: Vec<NilssonContext>,
}

type World = u32;

impl NilssonInstance {
    pub fn n_atoms(&self) -> usize {
        self.n_base + self.rules.len() + self.contexts.len()
    }

    fn mu(&self, rule: usize) -> usize {
        self.n_base + rule
    }

    fn nu(&self, context: usize) -> usize {
        self.n_base + self.rules.len() + context
    }

    fn atom_name(&self, atom: usize) -> String {
        if atom < self.n_base {
            format!("a{atom}")
        } else if atom < self.n_base + self.rules.len() {
            format!("mu{}", atom - self.n_base)
        } else {
            format!("nu{}", atom - self.n_base - self.rules.len())
        }
    }

    fn describe(&self, w: World) -> String {
        let atoms: Vec<String> = (0..self.n_atoms())
            .filter(|&a| w & (1 << a) != 0)
            .map(|a| self.atom_name(a))
            .collect();
        format!("{{{}}}", atoms.join(", "))
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if self.n_base == 0 || self.n_base > MAX_BASE_ATOMS {
            return Err(OracleError::TooLarge(format!("{} base atoms", self.n_base)));
        }
        if self.rules.len() > MAX_RULES {
            return Err(OracleError::TooLarge(format!("{} rules", self.rules.len())));
        }
        if self.contexts.is_empty() || self.contexts.len() > MAX_CONTEXTS {
            return Err(OracleError::TooLarge(format!("{} contexts", self.contexts.len())));
        }
        let base_ok = |a: &usize| *a < self.n_base;
        if !self.facts.iter().all(base_ok) {
            return Err(OracleError::Malformed("fact outside the base atoms".into()));
        }
        for (i, r) in self.rules.iter().enumerate() {
            if !base_ok(&r.head) || !r.body.iter().all(base_ok) {
                return Err(OracleError::Malformed(format!("rule {i} uses an unknown atom")));
            }
        }
        for (i, c) in self.contexts.iter().enumerate() {
            if c.active.iter().any(|&r| r >= self.rules.len()) {
                return Err(OracleError::Malformed(format!("context {i} activates an unknown rule")));
            }
            if c.probability.is_nan() || c.probability < 0.0 {
                return Err(OracleError::Malformed(format!(
                    "context {i} has probability {}",
                    c.probability
                )));
            }
        }
        let total: f64 = self.contexts.iter().map(|c| c.probability).sum();
        if (total - 1.0).abs() > CHECK_TOLERANCE {
            return Err(OracleError::Malformed(format!("context probabilities sum to {total}")));
        }
        Ok(())
    }

    /// Whether `w` satisfies every probability-one clause.
    fn is_model(&self, w: World) -> bool {
        let has = |a: usize| w & (1 << a) != 0;
        if !self.facts.iter().all(|&f| has(f)) {
            return false;
        }
        for (i, r) in self.rules.iter().enumerate() {
            if has(self.mu(i)) && r.body.iter().all(|&b| has(b)) && !has(r.head) {
                return false;
            }
        }
        let mut nus = 0;
        for (c, ctx) in self.contexts.iter().enumerate() {
            if has(self.nu(c)) {
                nus += 1;
                if !ctx.active.iter().all(|&r| has(self.mu(r))) {
                    return false;
                }
            }
        }
        nus <= 1
    }

    /// Least model of the probability-one clauses together with `nu_c`.
    fn minimal_model(&self, c: usize) -> World {
        let mut w: World = 1 << self.nu(c);
        for &f in &self.facts {
            w |= 1 << f;
        }
        for &r in &self.contexts[c].active {
            w |= 1 << self.mu(r);
        }
        loop {
            let before = w;
            for (i, r) in self.rules.iter().enumerate() {
                if w & (1 << self.mu(i)) != 0 && r.body.iter().all(|&b| w & (1 << b) != 0) {
                    w |= 1 << r.head;
                }
            }
            if w == before {
                return w;
            }
        }
    }

    /// A random instance within the size caps.
    pub fn random(rng: &mut impl Rng) -> Self {
        let n_base = rng.gen_range(2..=MAX_BASE_ATOMS);
        let facts: Vec<usize> = (0..n_base).filter(|_| rng.gen_bool(0.3)).collect();
        let rules = (0..rng.gen_range(1..=MAX_RULES))
            .map(|_| GroundRule {
                head: rng.gen_range(0..n_base),
                body: (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(0..n_base)).collect(),
            })
            .collect::<Vec<_>>();
        let n_contexts = rng.gen_range(1..=MAX_CONTEXTS);
        let mut weights: Vec<f64> = (0..n_contexts)
            .map(|_| {
                if rng.gen_bool(0.15) {
                    0.0
                } else {
                    rng.gen_range(0.05..1.0)
                }
            })
            .collect();
        if weights.iter().all(|&w| w == 0.0) {
            weights[0] = 1.0;
        }
        let total: f64 = weights.iter().sum();
        let contexts = weights
            .iter()
            .map(|w| NilssonContext {
                active: (0..rules.len()).filter(|_| rng.gen_bool(0.5)).collect(),
                probability: w / total,
            })
            .collect();
        NilssonInstance {
            n_base,
            facts,
            rules,
            contexts,
        }
    }
}

/// Enumerates all `2^n_atoms` worlds and checks
///
/// * every minimal model satisfies the probability-one clauses,
/// * every world carrying mass satisfies exactly one context atom, and every
///   model satisfies at most one,
/// * the mass on `nu_c` equals `P(c)`,
/// * for every base atom `q`, the mass of worlds satisfying `q` equals the
///   total probability of contexts whose program entails `q`, where
///   entailment means truth in all models containing `nu_c`.
pub fn verify_nilsson(instance: &NilssonInstance) -> Result<CheckReport, OracleError> {
    instance.validate()?;
    let n_atoms = instance.n_atoms();
    let n_contexts = instance.contexts.len();
    let all: World = if n_atoms == 32 { World::MAX } else { (1 << n_atoms) - 1 };
    let nu_mask: World = (0..n_contexts).fold(0, |m, c| m | 1 << instance.nu(c));

    let mut details = Vec::new();
    let mut passed = true;
    let mut fail = |details: &mut Vec<String>, message: String| {
        passed = false;
        details.push(message);
    };

    // entailed[c] = intersection of all models containing nu_c
    let mut entailed: Vec<World> = vec![all; n_contexts];
    let mut has_model = vec![false; n_contexts];
    let mut visited: u64 = 0;
    for w in 0..=all {
        visited += 1;
        if !instance.is_model(w) {
            continue;
        }
        if (w & nu_mask).count_ones() > 1 {
            fail(
                &mut details,
                format!("model {} holds several context atoms", instance.describe(w)),
            );
        }
        for (c, slot) in entailed.iter_mut().enumerate() {
            if w & (1 << instance.nu(c)) != 0 {
                *slot &= w;
                has_model[c] = true;
            }
        }
    }
    if visited != 1u64 << n_atoms {
        fail(
            &mut details,
            format!("visited {visited} worlds, expected {}", 1u64 << n_atoms),
        );
    }
    details.push(format!("{visited} worlds enumerated over {n_atoms} atoms"));

    let mut interpretation: Vec<(World, f64)> = Vec::new();
    for (c, &modelled) in has_model.iter().enumerate() {
        if !modelled {
            fail(&mut details, format!("context {c} has no model"));
            continue;
        }
        let w = instance.minimal_model(c);
        if !instance.is_model(w) {
            fail(
                &mut details,
                format!(
                    "minimal model {} of context {c} violates the program",
                    instance.describe(w)
                ),
            );
        }
        interpretation.push((w, instance.contexts[c].probability));
    }

    for &(w, p) in &interpretation {
        if p > 0.0 && (w & nu_mask).count_ones() != 1 {
            fail(
                &mut details,
                format!(
                    "world {} with mass {p} does not hold exactly one context atom",
                    instance.describe(w)
                ),
            );
        }
    }
    for c in 0..n_contexts {
        let mass: f64 = interpretation
            .iter()
            .filter(|(w, _)| w & (1 << instance.nu(c)) != 0)
            .map(|(_, p)| p)
            .sum();
        if (mass - instance.contexts[c].probability).abs() > CHECK_TOLERANCE {
            fail(
                &mut details,
                format!(
                    "nu{c} carries mass {mass}, expected {}",
                    instance.contexts[c].probability
                ),
            );
        }
    }
    for q in 0..instance.n_base {
        let semantic: f64 = interpretation
            .iter()
            .filter(|(w, _)| w & (1 << q) != 0)
            .map(|(_, p)| p)
            .sum();
        let syntactic: f64 = (0..n_contexts)
            .filter(|&c| has_model[c] && entailed[c] & (1 << q) != 0)
            .map(|c| instance.contexts[c].probability)
            .sum();
        if (semantic - syntactic).abs() > CHECK_TOLERANCE {
            fail(
                &mut details,
                format!("atom a{q}: world mass {semantic}, entailing-context mass {syntactic}"),
            );
        }
    }
    Ok(CheckReport::new("nilsson-semantics", passed, details))
}
