//! Indexed triple storage.
//!
//! A [`TripleStore`] holds a deduplicated set of `(head, relation, tail)` facts
//! over dense integer ids, together with the indices that rule grounding and
//! filtered evaluation need. Several stores (train/valid/test) can share one
//! pair of vocabularies through [`Dataset`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u32);

#[derive(Debug, Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple { head, relation, tail }
    }
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash)]
pub enum StoreRole {
    Train,
    Valid,
    Test,
}

impl fmt::Display for StoreRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StoreRole::Train => "train",
            StoreRole::Valid => "valid",
            StoreRole::Test => "test",
        })
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}: no triples")]
    Empty(PathBuf),
    #[error("lookup pattern must bind the relation")]
    UnboundRelation,
}

/// Bidirectional string <-> dense id map. Ids follow first-occurrence order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Lookup pattern. The relation must be bound; see [`TripleStore::lookup`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Pattern {
    pub head: Option<EntityId>,
    pub relation: Option<RelationId>,
    pub tail: Option<EntityId>,
}

#[derive(Debug, Clone)]
pub struct TripleStore {
    role: StoreRole,
    entities: Arc<Vocabulary>,
    relations: Arc<Vocabulary>,
    triples: Vec<Triple>,
    set: HashSet<Triple>,
    by_relation: Vec<Vec<u32>>,
    tails: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    heads: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    by_entity: Vec<Vec<u32>>,
    duplicates: usize,
}

impl TripleStore {
    /// Builds a store from triples already mapped into the given vocabularies.
    /// Duplicates are dropped, keeping the first occurrence.
    pub fn from_triples(
        role: StoreRole,
        entities: Arc<Vocabulary>,
        relations: Arc<Vocabulary>,
        input: impl IntoIterator<Item = Triple>,
    ) -> Self {
        let mut set = HashSet::new();
        let mut triples = Vec::new();
        let mut duplicates = 0;
        for t in input {
            debug_assert!(t.head.index() < entities.len() && t.tail.index() < entities.len());
            debug_assert!(t.relation.index() < relations.len());
            if set.insert(t) {
                triples.push(t);
            } else {
                duplicates += 1;
            }
        }

        let mut by_relation = vec![Vec::new(); relations.len()];
        let mut by_entity = vec![Vec::new(); entities.len()];
        let mut tails: HashMap<(EntityId, RelationId), Vec<EntityId>> = HashMap::new();
        let mut heads: HashMap<(EntityId, RelationId), Vec<EntityId>> = HashMap::new();
        for (i, t) in triples.iter().enumerate() {
            let i = i as u32;
            by_relation[t.relation.index()].push(i);
            by_entity[t.head.index()].push(i);
            if t.tail != t.head {
                by_entity[t.tail.index()].push(i);
            }
            tails.entry((t.head, t.relation)).or_default().push(t.tail);
            heads.entry((t.tail, t.relation)).or_default().push(t.head);
        }
        for v in tails.values_mut().chain(heads.values_mut()) {
            v.sort_unstable();
        }

        TripleStore {
            role,
            entities,
            relations,
            triples,
            set,
            by_relation,
            tails,
            heads,
            by_entity,
            duplicates,
        }
    }

    pub fn role(&self) -> StoreRole {
        self.role
    }

    pub fn entities(&self) -> &Arc<Vocabulary> {
        &self.entities
    }

    pub fn relations(&self) -> &Arc<Vocabulary> {
        &self.relations
    }

    /// Triples in first-occurrence order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Number of repeated lines dropped while building.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.set.contains(triple)
    }

    /// Sorted tails `t` with `(head, relation, t)` stored.
    pub fn tails(&self, head: EntityId, relation: RelationId) -> &[EntityId] {
        self.tails.get(&(head, relation)).map_or(&[], Vec::as_slice)
    }

    /// Sorted heads `h` with `(h, relation, tail)` stored.
    pub fn heads(&self, tail: EntityId, relation: RelationId) -> &[EntityId] {
        self.heads.get(&(tail, relation)).map_or(&[], Vec::as_slice)
    }

    pub fn relation_triples(&self, relation: RelationId) -> impl Iterator<Item = &Triple> + '_ {
        self.by_relation
            .get(relation.index())
            .into_iter()
            .flatten()
            .map(move |&i| &self.triples[i as usize])
    }

    pub fn relation_size(&self, relation: RelationId) -> usize {
        self.by_relation.get(relation.index()).map_or(0, Vec::len)
    }

    /// Triples with `entity` in head or tail position.
    pub fn adjacent(&self, entity: EntityId) -> impl Iterator<Item = &Triple> + '_ {
        self.by_entity
            .get(entity.index())
            .into_iter()
            .flatten()
            .map(move |&i| &self.triples[i as usize])
    }

    /// All triples matching the bound positions of `pattern`, sorted.
    /// Unknown ids yield an empty result.
    pub fn lookup(&self, pattern: Pattern) -> Result<Vec<Triple>, StoreError> {
        let relation = pattern.relation.ok_or(StoreError::UnboundRelation)?;
        let mut out: Vec<Triple> = match (pattern.head, pattern.tail) {
            (Some(h), Some(t)) => {
                let t = Triple::new(h, relation, t);
                if self.contains(&t) {
                    vec![t]
                } else {
                    vec![]
                }
            }
            (Some(h), None) => self
                .tails(h, relation)
                .iter()
                .map(|&t| Triple::new(h, relation, t))
                .collect(),
            (None, Some(t)) => self
                .heads(t, relation)
                .iter()
                .map(|&h| Triple::new(h, relation, t))
                .collect(),
            (None, None) => self.relation_triples(relation).copied().collect(),
        };
        out.sort_unstable();
        Ok(out)
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entities.name(id.0).unwrap_or("?")
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        self.relations.name(id.0).unwrap_or("?")
    }
}

type RawTriple = (String, String, String);

fn parse_triple_file(path: &Path) -> Result<Vec<RawTriple>, StoreError> {
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| StoreError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(format!(
                "expected head<TAB>relation<TAB>tail, found {} field(s)",
                fields.len()
            )));
        }
        if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
            return Err(parse_err(format!("field {} is empty", pos + 1)));
        }
        out.push((fields[0].into(), fields[1].into(), fields[2].into()));
    }
    if out.is_empty() {
        return Err(StoreError::Empty(path.to_path_buf()));
    }
    Ok(out)
}

fn intern_all(raw: &[RawTriple], entities: &mut Vocabulary, relations: &mut Vocabulary) -> Vec<Triple> {
    raw.iter()
        .map(|(h, r, t)| {
            let head = EntityId(entities.intern(h));
            let relation = RelationId(relations.intern(r));
            let tail = EntityId(entities.intern(t));
            Triple::new(head, relation, tail)
        })
        .collect()
}

/// Loads a single triple file with fresh vocabularies.
pub fn load_triples(path: impl AsRef<Path>, role: StoreRole) -> Result<TripleStore, StoreError> {
    let path = path.as_ref();
    let raw = parse_triple_file(path)?;
    let mut entities = Vocabulary::new();
    let mut relations = Vocabulary::new();
    let triples = intern_all(&raw, &mut entities, &mut relations);
    let store = TripleStore::from_triples(role, Arc::new(entities), Arc::new(relations), triples);
    if store.duplicates() > 0 {
        log::info!("{}: dropped {} duplicate triple(s)", path.display(), store.duplicates());
    }
    Ok(store)
}

/// Name used for the materialized inverse of a relation.
pub fn inverse_relation_name(name: &str) -> String {
    format!("{name}_inverse")
}

/// Train/valid/test splits over one shared pair of vocabularies.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: TripleStore,
    pub valid: Option<TripleStore>,
    pub test: TripleStore,
}

impl Dataset {
    /// Loads the splits, assigning ids in train, valid, test order. With
    /// `materialize_inverse`, every training triple `(h, r, t)` is mirrored as
    /// `(t, r_inverse, h)` in the train store.
    pub fn load(
        train: impl AsRef<Path>,
        valid: Option<&Path>,
        test: impl AsRef<Path>,
        materialize_inverse: bool,
    ) -> Result<Dataset, StoreError> {
        let raw_train = parse_triple_file(train.as_ref())?;
        let raw_valid = valid.map(parse_triple_file).transpose()?;
        let raw_test = parse_triple_file(test.as_ref())?;

        let mut entities = Vocabulary::new();
        let mut relations = Vocabulary::new();
        let mut train_triples = intern_all(&raw_train, &mut entities, &mut relations);
        let valid_triples = raw_valid
            .as_ref()
            .map(|raw| intern_all(raw, &mut entities, &mut relations));
        let test_triples = intern_all(&raw_test, &mut entities, &mut relations);

        if materialize_inverse {
            let base = relations.len() as u32;
            let names: Vec<String> = relations.names().to_vec();
            for name in &names {
                relations.intern(&inverse_relation_name(name));
            }
            let mirrored: Vec<Triple> = train_triples
                .iter()
                .map(|t| Triple::new(t.tail, RelationId(base + t.relation.0), t.head))
                .collect();
            train_triples.extend(mirrored);
        }

        let entities = Arc::new(entities);
        let relations = Arc::new(relations);
        let build = |role, triples: Vec<Triple>| {
            let store = TripleStore::from_triples(role, entities.clone(), relations.clone(), triples);
            if store.duplicates() > 0 {
                log::info!("{role} split: dropped {} duplicate triple(s)", store.duplicates());
            }
            store
        };
        Ok(Dataset {
            train: build(StoreRole::Train, train_triples),
            valid: valid_triples.map(|t| build(StoreRole::Valid, t)),
            test: build(StoreRole::Test, test_triples),
        })
    }

    pub fn entities(&self) -> &Arc<Vocabulary> {
        self.train.entities()
    }

    pub fn relations(&self) -> &Arc<Vocabulary> {
        self.train.relations()
    }

    /// Every known-true triple across the splits, used for filtered ranking.
    pub fn filter_stores(&self) -> Vec<&TripleStore> {
        let mut stores = vec![&self.train];
        stores.extend(self.valid.as_ref());
        stores.push(&self.test);
        stores
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn store_of(lines: &str) -> TripleStore {
        let f = write_tmp(lines);
        load_triples(f.path(), StoreRole::Train).unwrap()
    }

    fn e(s: &TripleStore, name: &str) -> EntityId {
        EntityId(s.entities().get(name).unwrap())
    }

    fn r(s: &TripleStore, name: &str) -> RelationId {
        RelationId(s.relations().get(name).unwrap())
    }

    #[test]
    fn duplicates_are_dropped() {
        let s = store_of("a\tr\tb\na\tr\tb\n");
        assert_eq!(s.len(), 1);
        assert_eq!(s.entities().len(), 2);
        assert_eq!(s.relations().len(), 1);
        assert_eq!(s.duplicates(), 1);
    }

    #[test]
    fn arity_violation_reports_line() {
        let f = write_tmp("a\tr\tb\n# comment\na\tr\n");
        match load_triples(f.path(), StoreRole::Train) {
            Err(StoreError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn space_separated_line_is_rejected() {
        let f = write_tmp("a r b\n");
        assert!(matches!(
            load_triples(f.path(), StoreRole::Train),
            Err(StoreError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_tmp("# only a comment\n\n");
        assert!(matches!(
            load_triples(f.path(), StoreRole::Train),
            Err(StoreError::Empty(_))
        ));
    }

    #[test]
    fn lookup_patterns() {
        let s = store_of("a\tr\tb\na\tr\tc\nd\tr\tb\n");
        let (a, b, c, d, rr) = (e(&s, "a"), e(&s, "b"), e(&s, "c"), e(&s, "d"), r(&s, "r"));
        let got = s
            .lookup(Pattern {
                head: Some(a),
                relation: Some(rr),
                tail: None,
            })
            .unwrap();
        assert_eq!(got, vec![Triple::new(a, rr, b), Triple::new(a, rr, c)]);
        let got = s
            .lookup(Pattern {
                head: None,
                relation: Some(rr),
                tail: Some(b),
            })
            .unwrap();
        assert_eq!(got, vec![Triple::new(a, rr, b), Triple::new(d, rr, b)]);
        // relation id outside the vocabulary
        let got = s
            .lookup(Pattern {
                head: Some(a),
                relation: Some(RelationId(7)),
                tail: None,
            })
            .unwrap();
        assert!(got.is_empty());
        assert!(matches!(
            s.lookup(Pattern {
                head: Some(a),
                relation: None,
                tail: None
            }),
            Err(StoreError::UnboundRelation)
        ));
    }

    #[test]
    fn unused_relation_gives_empty_set() {
        let f = write_tmp("a\tr\tb\nc\ts\td\n");
        let s = load_triples(f.path(), StoreRole::Train).unwrap();
        let a = e(&s, "a");
        let got = s
            .lookup(Pattern {
                head: Some(a),
                relation: Some(r(&s, "s")),
                tail: None,
            })
            .unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn ids_follow_first_occurrence() {
        let s = store_of("x\tp\ty\nz\tq\tx\n");
        assert_eq!(s.entities().names(), ["x", "y", "z"]);
        assert_eq!(s.relations().names(), ["p", "q"]);
    }

    #[test]
    fn dataset_shares_vocabulary_and_mirrors_inverse() {
        let train = write_tmp("a\tr\tb\n");
        let test = write_tmp("b\tr\tc\n");
        let ds = Dataset::load(train.path(), None, test.path(), true).unwrap();
        assert_eq!(ds.entities().names(), ["a", "b", "c"]);
        assert_eq!(ds.relations().names(), ["r", "r_inverse"]);
        assert_eq!(ds.train.len(), 2);
        let inv = RelationId(1);
        assert_eq!(ds.train.tails(EntityId(1), inv), &[EntityId(0)]);
        assert_eq!(ds.test.len(), 1);
    }
}
