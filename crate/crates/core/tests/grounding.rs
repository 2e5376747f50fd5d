//! Rule grounding against an exhaustive assignment enumerator on small stores.

use std::sync::Arc;

use proptest::prelude::*;

use rulecircuit::context::build_matrix;
use rulecircuit::rules::{abduce_rules, parse_rules, predict_candidates, QueryPattern, Rule, RuleProgram, Term};
use rulecircuit::store::{EntityId, RelationId, StoreRole, Triple, TripleStore, Vocabulary};

const ENTITIES: u32 = 5;
const RELATIONS: u32 = 3;

fn vocabularies() -> (Arc<Vocabulary>, Arc<Vocabulary>) {
    let mut e = Vocabulary::new();
    for i in 0..ENTITIES {
        e.intern(&format!("e{i}"));
    }
    let mut r = Vocabulary::new();
    for i in 0..RELATIONS {
        r.intern(&format!("r{i}"));
    }
    (Arc::new(e), Arc::new(r))
}

fn rule_text(template: usize, rels: [u32; 4], consts: [u32; 2]) -> String {
    let [a, b, c, d] = rels.map(|r| format!("r{r}"));
    let [k, j] = consts.map(|e| format!("e{e}"));
    let body = match template {
        0 => format!("{a}(X,Y) <= {b}(X,Y)"),
        1 => format!("{a}(X,Y) <= {b}(Y,X)"),
        2 => format!("{a}(X,Y) <= {b}(X,A), {c}(A,Y)"),
        3 => format!("{a}(X,Y) <= {b}(A,X), {c}(Y,A)"),
        4 => format!("{a}(X,{k}) <= {b}(X,A)"),
        5 => format!("{a}(X,{k}) <= {b}(X,{j})"),
        6 => format!("{a}({k},Y) <= {b}(Y,A)"),
        _ => format!("{a}(X,Y) <= {b}(X,A), {c}(A,B), {d}(B,Y)"),
    };
    format!("2\t1\t0.5\t{body}\n")
}

/// Every variable the rule mentions, by slot.
fn variables(rule: &Rule) -> Vec<usize> {
    let mut v: Vec<usize> = std::iter::once(&rule.head)
        .chain(&rule.body)
        .flat_map(|a| a.vars())
        .map(|v| v.slot())
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn resolve(term: Term, assignment: &[u32; 26]) -> EntityId {
    match term {
        Term::Var(v) => EntityId(assignment[v.slot()]),
        Term::Const(c) => c,
    }
}

/// Whether some assignment of all variables makes the head equal `target`
/// and every body atom a stored triple other than `target`.
fn brute_explains(rule: &Rule, target: &Triple, store: &TripleStore) -> bool {
    let vars = variables(rule);
    let mut assignment = [0u32; 26];
    let combos = (ENTITIES as usize).pow(vars.len() as u32);
    (0..combos).any(|mut code| {
        for &slot in &vars {
            assignment[slot] = (code % ENTITIES as usize) as u32;
            code /= ENTITIES as usize;
        }
        let head = Triple::new(
            resolve(rule.head.subject, &assignment),
            rule.head.relation,
            resolve(rule.head.object, &assignment),
        );
        head == *target
            && rule.body.iter().all(|atom| {
                let t = Triple::new(
                    resolve(atom.subject, &assignment),
                    atom.relation,
                    resolve(atom.object, &assignment),
                );
                t != *target && store.contains(&t)
            })
    })
}

fn store_strategy() -> impl Strategy<Value = Vec<(u32, u32, u32)>> {
    prop::collection::vec((0..ENTITIES, 0..RELATIONS, 0..ENTITIES), 1..16)
}

fn rules_strategy() -> impl Strategy<Value = Vec<(usize, [u32; 4], [u32; 2])>> {
    prop::collection::vec(
        (
            0..8usize,
            prop::array::uniform4(0..RELATIONS),
            prop::array::uniform2(0..ENTITIES),
        ),
        1..6,
    )
}

fn build(triples: &[(u32, u32, u32)], rules: &[(usize, [u32; 4], [u32; 2])]) -> (TripleStore, RuleProgram) {
    let (ents, rels) = vocabularies();
    let store = TripleStore::from_triples(
        StoreRole::Train,
        ents.clone(),
        rels.clone(),
        triples
            .iter()
            .map(|&(h, r, t)| Triple::new(EntityId(h), RelationId(r), EntityId(t))),
    );
    let mut text = String::new();
    let mut seen = std::collections::HashSet::new();
    for &(template, r, c) in rules {
        let line = rule_text(template, r, c);
        if seen.insert(line.clone()) {
            text.push_str(&line);
        }
    }
    (store, parse_rules(&text, &ents, &rels).expect("templates parse"))
}

proptest! {
    #[test]
    fn abduction_matches_exhaustive_enumeration(triples in store_strategy(), rules in rules_strategy()) {
        let (store, program) = build(&triples, &rules);
        let matrix = build_matrix(&program, &store);
        for (c, t) in store.triples().iter().enumerate() {
            let expected: Vec<u32> = program
                .rules()
                .iter()
                .filter(|r| brute_explains(r, t, &store))
                .map(|r| r.id.0)
                .collect();
            let got: Vec<u32> = abduce_rules(t, &program, &store).iter().map(|r| r.0).collect();
            prop_assert_eq!(&got, &expected);
            let column: Vec<u32> = matrix.column(c).iter().map(|r| r.0).collect();
            prop_assert_eq!(column, expected);
        }
    }

    #[test]
    fn predictions_match_exhaustive_enumeration(
        triples in store_strategy(),
        rules in rules_strategy(),
        entity in 0..ENTITIES,
    ) {
        let (store, program) = build(&triples, &rules);
        for rule in program.rules() {
            let relation = rule.head.relation;
            for pattern in [QueryPattern::tail(EntityId(entity), relation), QueryPattern::head(EntityId(entity), relation)] {
                let expected: Vec<EntityId> = (0..ENTITIES)
                    .map(EntityId)
                    .filter(|&e| brute_explains(rule, &pattern.complete(e), &store))
                    .collect();
                prop_assert_eq!(predict_candidates(rule, &pattern, &store).unwrap(), expected);
            }
        }
    }
}
