//! Knowledge-graph storage: interned vocabulary, a deduplicated triple set,
//! and adjacency indices in both directions.
//!
//! Graphs are immutable once built, so concurrent reads are always safe.
//! Attacks never mutate a base graph: [`KnowledgeGraph::insert_triples`]
//! returns a [`PoisonedGraph`] overlay that layers extra triples on top while
//! sharing the clean base. Both implement [`GraphView`], and everything
//! downstream (grounding, retrieval, crafting) is generic over that trait so
//! identical code runs against clean and poisoned graphs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize;

/// Dense handle for an interned entity label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(transparent)]
pub struct EntityId(pub u32);

/// Dense handle for an interned relation label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(transparent)]
pub struct RelationId(pub u32);

/// Directed labeled edge. Self-loops are legal; (head, relation, tail) is
/// unique within a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// Traversal direction for adjacency queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

/// Read-only interface shared by base graphs and poisoned overlays.
pub trait GraphView {
    fn entity_count(&self) -> usize;
    fn relation_count(&self) -> usize;
    fn triple_count(&self) -> usize;

    /// Canonical (normalized) label of an interned entity.
    ///
    /// Panics on an unregistered id; use [`GraphView::has_entity`] first when
    /// the id is untrusted.
    fn entity_label(&self, entity: EntityId) -> &str;
    fn relation_label(&self, relation: RelationId) -> &str;

    /// Resolve a label to its entity id. The input is normalized before
    /// lookup.
    fn entity_id(&self, label: &str) -> Option<EntityId>;
    fn relation_id(&self, label: &str) -> Option<RelationId>;

    fn contains_triple(&self, triple: &Triple) -> bool;

    /// All triples, ascending by (head, relation, tail).
    fn triples(&self) -> Vec<Triple>;

    /// Entities one hop from `entity` along `relation`: tails of matching
    /// triples for forward queries, heads for reverse. Ascending by id;
    /// duplicate-free because triples are a set.
    fn step(&self, entity: EntityId, relation: RelationId, direction: Direction) -> Vec<EntityId>;

    /// All (relation, neighbor) pairs one hop from `entity`, one per matching
    /// triple, ascending by (relation, neighbor).
    fn neighbors(&self, entity: EntityId, direction: Direction) -> Vec<(RelationId, EntityId)>;

    fn has_entity(&self, entity: EntityId) -> bool {
        (entity.0 as usize) < self.entity_count()
    }

    fn has_relation(&self, relation: RelationId) -> bool {
        (relation.0 as usize) < self.relation_count()
    }

    /// One-hop adjacency: endpoints of triples matching `(entity, relation)`
    /// in the given direction, with `None` matching every relation. One
    /// element per matching triple, sorted ascending by entity id.
    fn adjacency_query(
        &self,
        entity: EntityId,
        relation: Option<RelationId>,
        direction: Direction,
    ) -> Result<Vec<EntityId>> {
        if !self.has_entity(entity) {
            return Err(Error::UnknownEntity(entity));
        }
        match relation {
            Some(r) => {
                if !self.has_relation(r) {
                    return Err(Error::UnknownRelation(r));
                }
                Ok(self.step(entity, r, direction))
            }
            None => {
                let mut out: Vec<EntityId> = self
                    .neighbors(entity, direction)
                    .into_iter()
                    .map(|(_, e)| e)
                    .collect();
                out.sort_unstable();
                Ok(out)
            }
        }
    }
}

/// Immutable per-question knowledge graph G = (E, R, T).
#[derive(Clone, Debug, Default)]
pub struct KnowledgeGraph {
    entity_labels: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    relation_labels: Vec<String>,
    relation_ids: HashMap<String, RelationId>,
    triples: BTreeSet<Triple>,
    // Indexed by entity id; per-relation neighbor lists kept sorted.
    forward: Vec<BTreeMap<RelationId, Vec<EntityId>>>,
    reverse: Vec<BTreeMap<RelationId, Vec<EntityId>>>,
}

impl KnowledgeGraph {
    /// Build a graph from raw (head, relation, tail) label triples.
    ///
    /// Labels are normalized before interning, duplicate triples collapse,
    /// and ids are assigned in first-appearance order. The resulting
    /// label-level triple set is independent of input order.
    pub fn from_raw_triples<I, S>(raw: I) -> Self
    where
        I: IntoIterator<Item = (S, S, S)>,
        S: AsRef<str>,
    {
        let mut g = KnowledgeGraph::default();
        for (h, r, t) in raw {
            let head = g.intern_entity(h.as_ref());
            let relation = g.intern_relation(r.as_ref());
            let tail = g.intern_entity(t.as_ref());
            let triple = Triple {
                head,
                relation,
                tail,
            };
            if g.triples.insert(triple) {
                g.forward[head.0 as usize]
                    .entry(relation)
                    .or_default()
                    .push(tail);
                g.reverse[tail.0 as usize]
                    .entry(relation)
                    .or_default()
                    .push(head);
            }
        }
        for index in g.forward.iter_mut().chain(g.reverse.iter_mut()) {
            for list in index.values_mut() {
                list.sort_unstable();
            }
        }
        g
    }

    fn intern_entity(&mut self, label: &str) -> EntityId {
        let norm = normalize(label);
        if let Some(&id) = self.entity_ids.get(&norm) {
            return id;
        }
        let id = EntityId(self.entity_labels.len() as u32);
        self.entity_labels.push(norm.clone());
        self.entity_ids.insert(norm, id);
        self.forward.push(BTreeMap::new());
        self.reverse.push(BTreeMap::new());
        id
    }

    fn intern_relation(&mut self, label: &str) -> RelationId {
        let norm = normalize(label);
        if let Some(&id) = self.relation_ids.get(&norm) {
            return id;
        }
        let id = RelationId(self.relation_labels.len() as u32);
        self.relation_labels.push(norm.clone());
        self.relation_ids.insert(norm, id);
        id
    }

    /// All entity ids, ascending.
    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.entity_labels.len() as u32).map(EntityId)
    }

    /// All relation ids, ascending.
    pub fn relations(&self) -> impl Iterator<Item = RelationId> + '_ {
        (0..self.relation_labels.len() as u32).map(RelationId)
    }

    /// Overlay `new` triples on this graph without mutating it. Triples
    /// already present are ignored, so re-applying a perturbation set is a
    /// no-op. Every id must already be registered; anything else is a
    /// [`Error::StealthViolation`] — the attack's hard constraint.
    pub fn insert_triples(&self, new: &[Triple]) -> Result<PoisonedGraph<'_>> {
        let mut added: BTreeSet<Triple> = BTreeSet::new();
        for t in new {
            if !self.has_entity(t.head)
                || !self.has_entity(t.tail)
                || !self.has_relation(t.relation)
            {
                return Err(Error::StealthViolation {
                    head: t.head,
                    relation: t.relation,
                    tail: t.tail,
                });
            }
            if !self.triples.contains(t) {
                added.insert(*t);
            }
        }
        let mut added_forward: HashMap<EntityId, BTreeMap<RelationId, Vec<EntityId>>> =
            HashMap::new();
        let mut added_reverse: HashMap<EntityId, BTreeMap<RelationId, Vec<EntityId>>> =
            HashMap::new();
        for t in &added {
            added_forward
                .entry(t.head)
                .or_default()
                .entry(t.relation)
                .or_default()
                .push(t.tail);
            added_reverse
                .entry(t.tail)
                .or_default()
                .entry(t.relation)
                .or_default()
                .push(t.head);
        }
        for index in added_forward.values_mut().chain(added_reverse.values_mut()) {
            for list in index.values_mut() {
                list.sort_unstable();
            }
        }
        Ok(PoisonedGraph {
            base: self,
            added,
            added_forward,
            added_reverse,
        })
    }
}

impl GraphView for KnowledgeGraph {
    fn entity_count(&self) -> usize {
        self.entity_labels.len()
    }

    fn relation_count(&self) -> usize {
        self.relation_labels.len()
    }

    fn triple_count(&self) -> usize {
        self.triples.len()
    }

    fn entity_label(&self, entity: EntityId) -> &str {
        &self.entity_labels[entity.0 as usize]
    }

    fn relation_label(&self, relation: RelationId) -> &str {
        &self.relation_labels[relation.0 as usize]
    }

    fn entity_id(&self, label: &str) -> Option<EntityId> {
        self.entity_ids.get(&normalize(label)).copied()
    }

    fn relation_id(&self, label: &str) -> Option<RelationId> {
        self.relation_ids.get(&normalize(label)).copied()
    }

    fn contains_triple(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    fn triples(&self) -> Vec<Triple> {
        self.triples.iter().copied().collect()
    }

    fn step(&self, entity: EntityId, relation: RelationId, direction: Direction) -> Vec<EntityId> {
        let index = match direction {
            Direction::Forward => &self.forward,
            Direction::Reverse => &self.reverse,
        };
        index
            .get(entity.0 as usize)
            .and_then(|m| m.get(&relation))
            .cloned()
            .unwrap_or_default()
    }

    fn neighbors(&self, entity: EntityId, direction: Direction) -> Vec<(RelationId, EntityId)> {
        let index = match direction {
            Direction::Forward => &self.forward,
            Direction::Reverse => &self.reverse,
        };
        let Some(map) = index.get(entity.0 as usize) else {
            return Vec::new();
        };
        map.iter()
            .flat_map(|(&r, list)| list.iter().map(move |&e| (r, e)))
            .collect()
    }
}

/// Non-destructive poisoned view: the clean base plus inserted triples.
/// Vocabulary is exactly the base's.
#[derive(Clone, Debug)]
pub struct PoisonedGraph<'a> {
    base: &'a KnowledgeGraph,
    added: BTreeSet<Triple>,
    added_forward: HashMap<EntityId, BTreeMap<RelationId, Vec<EntityId>>>,
    added_reverse: HashMap<EntityId, BTreeMap<RelationId, Vec<EntityId>>>,
}

impl<'a> PoisonedGraph<'a> {
    pub fn base(&self) -> &'a KnowledgeGraph {
        self.base
    }

    /// Triples present in the overlay but not the base.
    pub fn added_triples(&self) -> &BTreeSet<Triple> {
        &self.added
    }
}

fn merge_sorted(mut a: Vec<EntityId>, b: &[EntityId]) -> Vec<EntityId> {
    if b.is_empty() {
        return a;
    }
    a.extend_from_slice(b);
    a.sort_unstable();
    a.dedup();
    a
}

impl GraphView for PoisonedGraph<'_> {
    fn entity_count(&self) -> usize {
        self.base.entity_count()
    }

    fn relation_count(&self) -> usize {
        self.base.relation_count()
    }

    fn triple_count(&self) -> usize {
        self.base.triple_count() + self.added.len()
    }

    fn entity_label(&self, entity: EntityId) -> &str {
        self.base.entity_label(entity)
    }

    fn relation_label(&self, relation: RelationId) -> &str {
        self.base.relation_label(relation)
    }

    fn entity_id(&self, label: &str) -> Option<EntityId> {
        self.base.entity_id(label)
    }

    fn relation_id(&self, label: &str) -> Option<RelationId> {
        self.base.relation_id(label)
    }

    fn contains_triple(&self, triple: &Triple) -> bool {
        self.base.contains_triple(triple) || self.added.contains(triple)
    }

    fn triples(&self) -> Vec<Triple> {
        let mut all = self.base.triples();
        all.extend(self.added.iter().copied());
        all.sort_unstable();
        all
    }

    fn step(&self, entity: EntityId, relation: RelationId, direction: Direction) -> Vec<EntityId> {
        let base = self.base.step(entity, relation, direction);
        let extra = match direction {
            Direction::Forward => &self.added_forward,
            Direction::Reverse => &self.added_reverse,
        };
        match extra.get(&entity).and_then(|m| m.get(&relation)) {
            Some(list) => merge_sorted(base, list),
            None => base,
        }
    }

    fn neighbors(&self, entity: EntityId, direction: Direction) -> Vec<(RelationId, EntityId)> {
        let mut out = self.base.neighbors(entity, direction);
        let extra = match direction {
            Direction::Forward => &self.added_forward,
            Direction::Reverse => &self.added_reverse,
        };
        if let Some(map) = extra.get(&entity) {
            for (&r, list) in map {
                out.extend(list.iter().map(|&e| (r, e)));
            }
            out.sort_unstable();
            out.dedup();
        }
        out
    }
}
