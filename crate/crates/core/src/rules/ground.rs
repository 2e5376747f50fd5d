//! Rule application by backtracking join over the store indices.
//!
//! Body atoms are matched one at a time, always picking the remaining atom
//! with the most bound positions (ties: body order). A body triple that equals
//! the instantiated head is never used as evidence for that head.

use std::collections::BTreeSet;

use super::{Atom, Rule, RuleError, RuleId, RuleProgram, Term, Variable};
use crate::store::{EntityId, RelationId, Triple, TripleStore};

/// Which side of the query triple is unknown.
#[derive(Debug, Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    /// `(?, relation, entity)`
    Head,
    /// `(entity, relation, ?)`
    Tail,
}

/// A link-prediction query with one side open.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash)]
pub struct QueryPattern {
    pub direction: Direction,
    pub entity: EntityId,
    pub relation: RelationId,
}

impl QueryPattern {
    pub fn tail(head: EntityId, relation: RelationId) -> Self {
        QueryPattern {
            direction: Direction::Tail,
            entity: head,
            relation,
        }
    }

    pub fn head(tail: EntityId, relation: RelationId) -> Self {
        QueryPattern {
            direction: Direction::Head,
            entity: tail,
            relation,
        }
    }

    /// The triple obtained by filling the open side with `candidate`.
    pub fn complete(&self, candidate: EntityId) -> Triple {
        match self.direction {
            Direction::Tail => Triple::new(self.entity, self.relation, candidate),
            Direction::Head => Triple::new(candidate, self.relation, self.entity),
        }
    }
}

type Bindings = [Option<EntityId>; 26];

fn value(term: Term, bindings: &Bindings) -> Option<EntityId> {
    match term {
        Term::Const(e) => Some(e),
        Term::Var(v) => bindings[v.slot()],
    }
}

/// Binds `term` to `entity`; fails on a clash with a constant or an existing binding.
fn bind(term: Term, entity: EntityId, bindings: &mut Bindings) -> bool {
    match term {
        Term::Const(e) => e == entity,
        Term::Var(v) => match bindings[v.slot()] {
            Some(e) => e == entity,
            None => {
                bindings[v.slot()] = Some(entity);
                true
            }
        },
    }
}

fn instantiate(atom: &Atom, bindings: &Bindings) -> Option<Triple> {
    Some(Triple::new(
        value(atom.subject, bindings)?,
        atom.relation,
        value(atom.object, bindings)?,
    ))
}

struct Grounder<'a> {
    store: &'a TripleStore,
    head: &'a Atom,
    body: &'a [Atom],
}

impl<'a> Grounder<'a> {
    fn new(rule: &'a Rule, store: &'a TripleStore) -> Self {
        Grounder {
            store,
            head: &rule.head,
            body: &rule.body,
        }
    }

    fn pick(&self, remaining: u8, bindings: &Bindings) -> usize {
        let mut best = usize::MAX;
        let mut best_bound = -1i32;
        for (i, atom) in self.body.iter().enumerate() {
            if remaining & (1 << i) == 0 {
                continue;
            }
            let bound = value(atom.subject, bindings).is_some() as i32 + value(atom.object, bindings).is_some() as i32;
            if bound > best_bound {
                best = i;
                best_bound = bound;
            }
        }
        best
    }

    /// Calls `f` with every store triple matching `atom` under `bindings`
    /// and the extended bindings. Stops early when `f` returns `true`.
    fn for_each_match(&self, atom: &Atom, bindings: &Bindings, f: &mut dyn FnMut(Triple, &Bindings) -> bool) -> bool {
        let mut emit = |t: Triple| -> bool {
            let mut next = *bindings;
            if bind(atom.subject, t.head, &mut next) && bind(atom.object, t.tail, &mut next) {
                f(t, &next)
            } else {
                false
            }
        };
        match (value(atom.subject, bindings), value(atom.object, bindings)) {
            (Some(s), Some(o)) => {
                let t = Triple::new(s, atom.relation, o);
                self.store.contains(&t) && emit(t)
            }
            (Some(s), None) => self
                .store
                .tails(s, atom.relation)
                .iter()
                .any(|&o| emit(Triple::new(s, atom.relation, o))),
            (None, Some(o)) => self
                .store
                .heads(o, atom.relation)
                .iter()
                .any(|&s| emit(Triple::new(s, atom.relation, o))),
            (None, None) => self.store.relation_triples(atom.relation).any(|&t| emit(t)),
        }
    }

    /// Whether the remaining atoms ground under `bindings`. The head must be
    /// fully instantiated.
    fn exists(&self, remaining: u8, bindings: &Bindings) -> bool {
        if remaining == 0 {
            return true;
        }
        let target = instantiate(self.head, bindings);
        let i = self.pick(remaining, bindings);
        let rest = remaining & !(1 << i);
        self.for_each_match(&self.body[i], bindings, &mut |t, next| {
            Some(t) != target && self.exists(rest, next)
        })
    }

    /// Collects every value of `var` occurring in a full grounding of the
    /// body under `bindings`.
    fn collect(
        &self,
        remaining: u8,
        bindings: &Bindings,
        var: Variable,
        used: &mut Vec<Triple>,
        out: &mut BTreeSet<EntityId>,
    ) {
        if let Some(candidate) = bindings[var.slot()] {
            if out.contains(&candidate) {
                return;
            }
            let target = instantiate(self.head, bindings);
            if used.iter().any(|t| Some(*t) == target) {
                return;
            }
            if self.exists(remaining, bindings) {
                out.insert(candidate);
            }
            return;
        }
        if remaining == 0 {
            return;
        }
        let i = self.pick(remaining, bindings);
        let rest = remaining & !(1 << i);
        self.for_each_match(&self.body[i], bindings, &mut |t, next| {
            used.push(t);
            self.collect(rest, next, var, used, out);
            used.pop();
            false
        });
    }

    fn all_atoms(&self) -> u8 {
        ((1u16 << self.body.len()) - 1) as u8
    }
}

/// Entities `e` such that filling the open side of `query` with `e` makes the
/// rule's body ground in `store`, ascending by id.
pub fn predict_candidates(rule: &Rule, query: &QueryPattern, store: &TripleStore) -> Result<Vec<EntityId>, RuleError> {
    if rule.head.relation != query.relation {
        return Err(RuleError::RelationMismatch {
            rule: rule.id,
            rule_relation: rule.head.relation,
            query_relation: query.relation,
        });
    }
    let (known, open) = match query.direction {
        Direction::Tail => (rule.head.subject, rule.head.object),
        Direction::Head => (rule.head.object, rule.head.subject),
    };
    let mut bindings: Bindings = [None; 26];
    if !bind(known, query.entity, &mut bindings) {
        return Ok(Vec::new());
    }
    let grounder = Grounder::new(rule, store);
    match open {
        Term::Const(c) => {
            if grounder.exists(grounder.all_atoms(), &bindings) {
                Ok(vec![c])
            } else {
                Ok(Vec::new())
            }
        }
        Term::Var(v) => {
            let mut out = BTreeSet::new();
            grounder.collect(grounder.all_atoms(), &bindings, v, &mut Vec::new(), &mut out);
            Ok(out.into_iter().collect())
        }
    }
}

/// Whether `rule` explains `triple`: its head unifies with the triple and its
/// body grounds in `store` without using the triple itself.
pub fn explains(rule: &Rule, triple: &Triple, store: &TripleStore) -> bool {
    if rule.head.relation != triple.relation {
        return false;
    }
    let mut bindings: Bindings = [None; 26];
    if !bind(rule.head.subject, triple.head, &mut bindings) || !bind(rule.head.object, triple.tail, &mut bindings) {
        return false;
    }
    let grounder = Grounder::new(rule, store);
    grounder.exists(grounder.all_atoms(), &bindings)
}

/// Ids of all rules in `program` that explain `triple`, ascending.
pub fn abduce_rules(triple: &Triple, program: &RuleProgram, store: &TripleStore) -> Vec<RuleId> {
    program
        .with_head(triple.relation)
        .iter()
        .copied()
        .filter(|&id| explains(program.rule(id), triple, store))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::parse_rules;
    use crate::store::{StoreRole, Vocabulary};
    use std::sync::Arc;

    struct Fixture {
        store: TripleStore,
        entities: Arc<Vocabulary>,
        relations: Arc<Vocabulary>,
    }

    impl Fixture {
        fn new(triples: &[(&str, &str, &str)]) -> Self {
            Self::with_extra(triples, &[], &[])
        }

        fn with_extra(triples: &[(&str, &str, &str)], ents: &[&str], rels: &[&str]) -> Self {
            let mut e = Vocabulary::new();
            let mut r = Vocabulary::new();
            let ts: Vec<Triple> = triples
                .iter()
                .map(|(h, rel, t)| Triple::new(EntityId(e.intern(h)), RelationId(r.intern(rel)), EntityId(e.intern(t))))
                .collect();
            for n in ents {
                e.intern(n);
            }
            for n in rels {
                r.intern(n);
            }
            let (e, r) = (Arc::new(e), Arc::new(r));
            Fixture {
                store: TripleStore::from_triples(StoreRole::Train, e.clone(), r.clone(), ts),
                entities: e,
                relations: r,
            }
        }

        fn e(&self, n: &str) -> EntityId {
            EntityId(self.entities.get(n).unwrap())
        }

        fn r(&self, n: &str) -> RelationId {
            RelationId(self.relations.get(n).unwrap())
        }

        fn program(&self, text: &str) -> RuleProgram {
            parse_rules(text, &self.entities, &self.relations).unwrap()
        }

        fn names(&self, ids: &[EntityId]) -> Vec<&str> {
            ids.iter().map(|&i| self.store.entity_name(i)).collect()
        }
    }

    #[test]
    fn single_atom_rule() {
        let fx = Fixture::with_extra(&[("a", "s", "b")], &[], &["r"]);
        let p = fx.program("1\t1\t1.0\tr(X,Y) <= s(X,Y)");
        let got = predict_candidates(&p.rules()[0], &QueryPattern::tail(fx.e("a"), fx.r("r")), &fx.store).unwrap();
        assert_eq!(fx.names(&got), ["b"]);
    }

    #[test]
    fn chain_rule_enumerates_all_endpoints() {
        let fx = Fixture::with_extra(&[("a", "s", "m"), ("m", "t", "c"), ("m", "t", "d")], &[], &["r"]);
        let p = fx.program("2\t1\t0.5\tr(X,Y) <= s(X,A), t(A,Y)");
        let got = predict_candidates(&p.rules()[0], &QueryPattern::tail(fx.e("a"), fx.r("r")), &fx.store).unwrap();
        assert_eq!(fx.names(&got), ["c", "d"]);
        let got = predict_candidates(&p.rules()[0], &QueryPattern::head(fx.e("d"), fx.r("r")), &fx.store).unwrap();
        assert_eq!(fx.names(&got), ["a"]);
    }

    #[test]
    fn relation_mismatch_is_rejected() {
        let fx = Fixture::with_extra(&[("a", "s", "b")], &[], &["r"]);
        let p = fx.program("1\t1\t1.0\tr(X,Y) <= s(X,Y)");
        let err = predict_candidates(&p.rules()[0], &QueryPattern::tail(fx.e("a"), fx.r("s")), &fx.store);
        assert!(matches!(err, Err(RuleError::RelationMismatch { .. })));
    }

    #[test]
    fn head_constant_rules() {
        let fx = Fixture::new(&[("a", "s", "x"), ("b", "r", "c")]);
        let p = fx.program("10\t10\t1.0\tr(X,c) <= s(X,A)");
        let rule = &p.rules()[0];
        let got = predict_candidates(rule, &QueryPattern::tail(fx.e("a"), fx.r("r")), &fx.store).unwrap();
        assert_eq!(fx.names(&got), ["c"]);
        let got = predict_candidates(rule, &QueryPattern::head(fx.e("c"), fx.r("r")), &fx.store).unwrap();
        assert_eq!(fx.names(&got), ["a"]);
        // tail query on an entity with no s-edge
        let got = predict_candidates(rule, &QueryPattern::tail(fx.e("b"), fx.r("r")), &fx.store).unwrap();
        assert!(got.is_empty());
        // head query for a constant the rule does not produce
        let got = predict_candidates(rule, &QueryPattern::head(fx.e("x"), fx.r("r")), &fx.store).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn abduction_excludes_the_target_triple() {
        let fx = Fixture::new(&[("a", "r", "b"), ("a", "s", "b")]);
        let p = fx.program("1\t1\t1.0\tr(X,Y) <= s(X,Y)");
        let t = Triple::new(fx.e("a"), fx.r("r"), fx.e("b"));
        assert_eq!(abduce_rules(&t, &p, &fx.store), vec![RuleId(0)]);

        let fx = Fixture::with_extra(&[("a", "r", "b")], &[], &["s"]);
        let p = fx.program("1\t1\t1.0\tr(X,Y) <= s(X,Y)");
        let t = Triple::new(fx.e("a"), fx.r("r"), fx.e("b"));
        assert!(abduce_rules(&t, &p, &fx.store).is_empty());

        // a rule whose body is the head relation itself cannot explain by self-support
        let p = fx.program("1\t1\t1.0\tr(X,Y) <= r(X,Y)");
        assert!(abduce_rules(&t, &p, &fx.store).is_empty());
    }

    #[test]
    fn abduction_ignores_rules_with_other_heads() {
        let fx = Fixture::with_extra(&[("a", "r", "b"), ("a", "s", "b")], &[], &["t"]);
        let p = fx.program("1\t1\t1.0\tt(X,Y) <= s(X,Y)");
        let t = Triple::new(fx.e("a"), fx.r("r"), fx.e("b"));
        assert!(abduce_rules(&t, &p, &fx.store).is_empty());
    }

    #[test]
    fn prediction_skips_groundings_through_the_target() {
        // r(X,Y) <= r(Y,X): for query (a, r, ?) the only candidate would be b via (b,r,a);
        // candidate a would need (a,r,a) itself.
        let fx = Fixture::new(&[("b", "r", "a"), ("a", "r", "a")]);
        let p = fx.program("1\t1\t1.0\tr(X,Y) <= r(Y,X)");
        let got = predict_candidates(&p.rules()[0], &QueryPattern::tail(fx.e("a"), fx.r("r")), &fx.store).unwrap();
        assert_eq!(fx.names(&got), ["b"]);
    }

    #[test]
    fn repeated_body_variable() {
        let fx = Fixture::with_extra(&[("a", "s", "a"), ("a", "s", "b"), ("b", "t", "c")], &[], &["r"]);
        let p = fx.program("1\t1\t1.0\tr(X,Y) <= s(X,X), s(X,Y)");
        let got = predict_candidates(&p.rules()[0], &QueryPattern::tail(fx.e("a"), fx.r("r")), &fx.store).unwrap();
        assert_eq!(fx.names(&got), ["a", "b"]);
        let got = predict_candidates(&p.rules()[0], &QueryPattern::tail(fx.e("b"), fx.r("r")), &fx.store).unwrap();
        assert!(got.is_empty());
    }
}
