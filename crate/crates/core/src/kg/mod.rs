//! Triple storage: interned vocabularies, train/valid/test splits and the
//! membership and adjacency indexes the trainer, rule engine and evaluator
//! query.
//!
//! Triple files are UTF-8, one `head\trelation\ttail` per line, no header.

mod family;
mod rule;

pub use family::{generate_family_kg, generate_family_kg_with, FamilyConfig};
pub use rule::{load_rules, write_rules, Rule, RuleKind, RuleLoad};

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Dense entity index assigned at interning time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub usize);

/// Dense relation index assigned at interning time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub usize);

impl EntityId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Triple {
            head: EntityId(head),
            relation: RelationId(relation),
            tail: EntityId(tail),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head.0, self.relation.0, self.tail.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// What to do with a triple already present in the split it is added to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DuplicatePolicy {
    #[default]
    Deduplicate,
    Reject,
}

/// String interner mapping surface names to contiguous ids.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
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

/// Outcome of loading one triple file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub added: usize,
    pub duplicates: usize,
    /// Entities first interned by a valid/test file, i.e. never seen in train.
    pub unseen_entities: Vec<EntityId>,
}

#[derive(Debug, Clone, Default)]
struct SplitStore {
    triples: Vec<Triple>,
    members: HashSet<Triple>,
}

impl SplitStore {
    fn insert(&mut self, triple: Triple) -> bool {
        if self.members.insert(triple) {
            self.triples.push(triple);
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entities: Vocabulary,
    relations: Vocabulary,
    train: SplitStore,
    valid: SplitStore,
    test: SplitStore,
    /// relation -> (head, tail) pairs of train triples, in insertion order
    adjacency: Vec<Vec<(EntityId, EntityId)>>,
    /// (relation, head) -> tails over train
    outgoing: HashMap<(RelationId, EntityId), Vec<EntityId>>,
    seen_in_train: Vec<bool>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entities(&self) -> &Vocabulary {
        &self.entities
    }

    pub fn relations(&self) -> &Vocabulary {
        &self.relations
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn intern_entity(&mut self, name: &str) -> EntityId {
        let id = self.entities.intern(name);
        if id == self.seen_in_train.len() {
            self.seen_in_train.push(false);
        }
        EntityId(id)
    }

    pub fn intern_relation(&mut self, name: &str) -> RelationId {
        let id = self.relations.intern(name);
        if id == self.adjacency.len() {
            self.adjacency.push(Vec::new());
        }
        RelationId(id)
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.get(name).map(RelationId)
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entities.name(id.0).unwrap_or("<unknown>")
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        self.relations.name(id.0).unwrap_or("<unknown>")
    }

    fn store(&self, split: Split) -> &SplitStore {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn triples(&self, split: Split) -> &[Triple] {
        &self.store(split).triples
    }

    pub fn train(&self) -> &[Triple] {
        &self.train.triples
    }

    pub fn valid(&self) -> &[Triple] {
        &self.valid.triples
    }

    pub fn test(&self) -> &[Triple] {
        &self.test.triples
    }

    pub fn contains(&self, split: Split, triple: &Triple) -> bool {
        self.store(split).members.contains(triple)
    }

    pub fn in_train(&self, triple: &Triple) -> bool {
        self.train.members.contains(triple)
    }

    /// Membership in train ∪ valid ∪ test, the filter set of the ranking protocol.
    pub fn is_known(&self, triple: &Triple) -> bool {
        Split::ALL.iter().any(|&s| self.contains(s, triple))
    }

    /// Train (head, tail) pairs of one relation.
    pub fn adjacency(&self, relation: RelationId) -> &[(EntityId, EntityId)] {
        self.adjacency
            .get(relation.0)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Train tails reachable from `head` through `relation`.
    pub fn tails(&self, head: EntityId, relation: RelationId) -> &[EntityId] {
        self.outgoing
            .get(&(relation, head))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn seen_in_train(&self, entity: EntityId) -> bool {
        self.seen_in_train.get(entity.0).copied().unwrap_or(false)
    }

    /// Adds an id-resolved triple. Returns `Ok(false)` for a deduplicated repeat.
    pub fn add_triple(&mut self, split: Split, triple: Triple, policy: DuplicatePolicy) -> Result<bool> {
        let (ne, nr) = (self.num_entities(), self.num_relations());
        if triple.head.0 >= ne || triple.tail.0 >= ne || triple.relation.0 >= nr {
            return Err(Error::Argument(format!(
                "triple {triple} out of range for {ne} entities and {nr} relations"
            )));
        }
        let store = match split {
            Split::Train => &mut self.train,
            Split::Valid => &mut self.valid,
            Split::Test => &mut self.test,
        };
        if !store.insert(triple) {
            return match policy {
                DuplicatePolicy::Deduplicate => Ok(false),
                DuplicatePolicy::Reject => Err(Error::Argument(format!(
                    "duplicate triple {triple} in {} split",
                    split.name()
                ))),
            };
        }
        if split == Split::Train {
            self.adjacency[triple.relation.0].push((triple.head, triple.tail));
            self.outgoing
                .entry((triple.relation, triple.head))
                .or_default()
                .push(triple.tail);
            self.seen_in_train[triple.head.0] = true;
            self.seen_in_train[triple.tail.0] = true;
        }
        Ok(true)
    }

    /// Interns the three names and adds the triple.
    pub fn add_named(&mut self, split: Split, head: &str, relation: &str, tail: &str) -> Result<bool> {
        let h = self.intern_entity(head);
        let r = self.intern_relation(relation);
        let t = self.intern_entity(tail);
        self.add_triple(
            split,
            Triple {
                head: h,
                relation: r,
                tail: t,
            },
            DuplicatePolicy::Deduplicate,
        )
    }

    /// Reads a tab-separated triple file into `split`.
    pub fn load_triples(
        &mut self,
        path: impl AsRef<Path>,
        split: Split,
        policy: DuplicatePolicy,
    ) -> Result<LoadReport> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        // Parse the whole file before touching the graph so a bad line leaves it unchanged.
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            rows.push((i + 1, fields[0], fields[1], fields[2]));
        }

        let mut report = LoadReport::default();
        for (line, h, r, t) in rows {
            let before = self.num_entities();
            let head = self.intern_entity(h);
            let relation = self.intern_relation(r);
            let tail = self.intern_entity(t);
            if split != Split::Train {
                report
                    .unseen_entities
                    .extend((before..self.num_entities()).map(EntityId));
            }
            let triple = Triple { head, relation, tail };
            match self.add_triple(split, triple, policy) {
                Ok(true) => report.added += 1,
                Ok(false) => report.duplicates += 1,
                Err(Error::Argument(msg)) => return Err(Error::parse(path, line, msg)),
                Err(e) => return Err(e),
            }
        }
        if report.duplicates > 0 {
            log::warn!(
                "{}: dropped {} duplicate triples in {} split",
                path.display(),
                report.duplicates,
                split.name()
            );
        }
        if !report.unseen_entities.is_empty() {
            log::info!(
                "{}: {} entities not seen in train",
                path.display(),
                report.unseen_entities.len()
            );
        }
        Ok(report)
    }

    /// Writes one split in the triple file format.
    pub fn write_triples(&self, path: impl AsRef<Path>, split: Split) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for t in self.triples(split) {
            writeln!(
                out,
                "{}\t{}\t{}",
                self.entity_name(t.head),
                self.relation_name(t.relation),
                self.entity_name(t.tail)
            )
            .map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}
