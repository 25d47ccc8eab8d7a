//! Path semantics over a knowledge graph: grounding relation paths into
//! entity-level reasoning paths, bounded path enumeration, and all-shortest
//! relation-path extraction between entity pairs.
//!
//! Grounding permits entity revisits — real subgraphs contain cycles, and
//! forbidding revisits would silently change which answers a path reaches.
//! Termination is guaranteed by the hop bound and per-call result caps; a
//! cap hit is always reported through an explicit `truncated` flag rather
//! than silently shortening results.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{Direction, EntityId, GraphView, RelationId, Triple};

/// Nonempty sequence of relations w = (r1, …, rl). The level of abstraction
/// the attacker and the planner exchange: no entities, only edge labels.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationPath {
    relations: Vec<RelationId>,
}

impl RelationPath {
    /// Build a relation path; the empty sequence is rejected because a
    /// zero-length path grounds to nothing an attack or a retriever can use.
    pub fn new(relations: Vec<RelationId>) -> Result<Self> {
        if relations.is_empty() {
            return Err(Error::EmptyRelationPath);
        }
        Ok(RelationPath { relations })
    }

    pub fn relations(&self) -> &[RelationId] {
        &self.relations
    }

    pub fn hop_count(&self) -> usize {
        self.relations.len()
    }

    /// Human-readable form, e.g. `locatedin -> containedin`.
    pub fn render(&self, graph: &impl GraphView) -> String {
        self.relations
            .iter()
            .map(|r| graph.relation_label(*r).to_string())
            .collect::<Vec<_>>()
            .join(" -> ")
    }
}

/// Entity-level instantiation p: e0 →r1 e1 … →rl el of a relation path.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReasoningPath {
    pub start: EntityId,
    pub steps: Vec<(RelationId, EntityId)>,
}

impl ReasoningPath {
    pub fn hop_count(&self) -> usize {
        self.steps.len()
    }

    /// Final entity el (the start itself for a zero-step path).
    pub fn terminal(&self) -> EntityId {
        self.steps.last().map(|&(_, e)| e).unwrap_or(self.start)
    }

    /// The consecutive triples (e_{i-1}, r_i, e_i) realizing this path.
    pub fn triples(&self) -> Vec<Triple> {
        let mut out = Vec::with_capacity(self.steps.len());
        let mut prev = self.start;
        for &(r, e) in &self.steps {
            out.push(Triple::new(prev, r, e));
            prev = e;
        }
        out
    }

    /// Projection back onto relation labels; `None` for a zero-step path.
    pub fn relation_path(&self) -> Option<RelationPath> {
        RelationPath::new(self.steps.iter().map(|&(r, _)| r).collect()).ok()
    }

    /// True when every consecutive triple is a member of `graph`.
    pub fn validates_against(&self, graph: &impl GraphView) -> bool {
        self.triples().iter().all(|t| graph.contains_triple(t))
    }

    /// Human-readable form, e.g. `cardiff → locatedin → wales → containedin → uk`.
    pub fn render(&self, graph: &impl GraphView) -> String {
        let mut out = graph.entity_label(self.start).to_string();
        for &(r, e) in &self.steps {
            out.push_str(" → ");
            out.push_str(graph.relation_label(r));
            out.push_str(" → ");
            out.push_str(graph.entity_label(e));
        }
        out
    }
}

/// Grounding result: paths in lexicographic entity order, plus whether the
/// cap cut the enumeration short.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grounded {
    pub paths: Vec<ReasoningPath>,
    pub truncated: bool,
}

/// Depth-first instantiation over sorted adjacency. Emits complete paths in
/// lexicographic order of their entity sequences; returns `false` to abort
/// the walk once the cap is exceeded.
fn ground_rec<G: GraphView>(
    graph: &G,
    relations: &[RelationId],
    depth: usize,
    current: &mut ReasoningPath,
    cap: usize,
    out: &mut Vec<ReasoningPath>,
    truncated: &mut bool,
) -> bool {
    if depth == relations.len() {
        if out.len() >= cap {
            *truncated = true;
            return false;
        }
        out.push(current.clone());
        return true;
    }
    let here = current.terminal();
    for next in graph.step(here, relations[depth], Direction::Forward) {
        current.steps.push((relations[depth], next));
        let keep_going = ground_rec(graph, relations, depth + 1, current, cap, out, truncated);
        current.steps.pop();
        if !keep_going {
            return false;
        }
    }
    true
}

/// Instantiate a possibly-empty relation prefix from `start`. The empty
/// prefix grounds to the single zero-step path at `start` — exactly what
/// prefix-grounded insertion needs for one-hop attack paths.
pub(crate) fn ground_prefix<G: GraphView>(
    graph: &G,
    start: EntityId,
    relations: &[RelationId],
    cap: usize,
) -> Result<Grounded> {
    if !graph.has_entity(start) {
        return Err(Error::UnknownEntity(start));
    }
    let mut out = Vec::new();
    let mut truncated = false;
    let mut current = ReasoningPath {
        start,
        steps: Vec::new(),
    };
    ground_rec(
        graph,
        relations,
        0,
        &mut current,
        cap,
        &mut out,
        &mut truncated,
    );
    Ok(Grounded {
        paths: out,
        truncated,
    })
}

/// All reasoning paths instantiating `path` from `start`, in deterministic
/// lexicographic-by-entity-id order, truncated at `cap`.
pub fn ground_relation_path<G: GraphView>(
    graph: &G,
    start: EntityId,
    path: &RelationPath,
    cap: usize,
) -> Result<Grounded> {
    ground_prefix(graph, start, path.relations(), cap)
}

/// Distinct terminal entities of grounding, computed by layered set
/// propagation — never materializes individual paths, so fan-out that would
/// trip the grounding cap is handled exactly.
pub(crate) fn terminal_of_prefix<G: GraphView>(
    graph: &G,
    start: EntityId,
    relations: &[RelationId],
) -> Result<BTreeSet<EntityId>> {
    if !graph.has_entity(start) {
        return Err(Error::UnknownEntity(start));
    }
    let mut layer: BTreeSet<EntityId> = BTreeSet::new();
    layer.insert(start);
    for &r in relations {
        let mut next = BTreeSet::new();
        for e in &layer {
            next.extend(graph.step(*e, r, Direction::Forward));
        }
        layer = next;
        if layer.is_empty() {
            break;
        }
    }
    Ok(layer)
}

/// Set of distinct final entities reachable by grounding `path` from `start`.
pub fn terminal_entities<G: GraphView>(
    graph: &G,
    start: EntityId,
    path: &RelationPath,
) -> Result<BTreeSet<EntityId>> {
    terminal_of_prefix(graph, start, path.relations())
}

/// All minimal-length relation paths connecting `src` to `dst` within
/// `max_hops`, via breadth-first layering. Every returned path has the same
/// length and grounds from `src` to a terminal set containing `dst`.
///
/// `src == dst` yields the empty set: the minimal connection is the
/// zero-length path, which the [`RelationPath`] invariant excludes.
pub fn shortest_relation_paths<G: GraphView>(
    graph: &G,
    src: EntityId,
    dst: EntityId,
    max_hops: usize,
) -> Result<BTreeSet<RelationPath>> {
    if !graph.has_entity(src) {
        return Err(Error::UnknownEntity(src));
    }
    if !graph.has_entity(dst) {
        return Err(Error::UnknownEntity(dst));
    }
    if src == dst {
        return Ok(BTreeSet::new());
    }

    // Forward exact-step layers F_j: entities reachable by some walk of
    // length exactly j. The first layer containing dst gives the minimal
    // relation-path length (any shorter labeled walk would appear earlier).
    let mut forward_layer: BTreeSet<EntityId> = BTreeSet::new();
    forward_layer.insert(src);
    let mut shortest_len = None;
    for l in 1..=max_hops {
        let mut next = BTreeSet::new();
        for e in &forward_layer {
            for (_, n) in graph.neighbors(*e, Direction::Forward) {
                next.insert(n);
            }
        }
        if next.contains(&dst) {
            shortest_len = Some(l);
            break;
        }
        if next.is_empty() {
            break;
        }
        forward_layer = next;
    }
    let Some(len) = shortest_len else {
        return Ok(BTreeSet::new());
    };

    // Backward exact-step layers D_k: entities with some walk of length
    // exactly k into dst. Restricting the forward enumeration to these
    // layers prunes every branch that cannot finish on time.
    let mut backward: Vec<BTreeSet<EntityId>> = Vec::with_capacity(len + 1);
    backward.push(BTreeSet::from([dst]));
    for k in 1..=len {
        let mut prev = BTreeSet::new();
        for e in &backward[k - 1] {
            for (_, n) in graph.neighbors(*e, Direction::Reverse) {
                prev.insert(n);
            }
        }
        backward.push(prev);
    }

    // Memoized suffix enumeration: suffixes(e, k) = all relation sequences
    // of length k walking from e into dst. Sharing suffix sets keeps the
    // work polynomial in the number of distinct (entity, depth) states.
    fn suffixes<G: GraphView>(
        graph: &G,
        dst: EntityId,
        e: EntityId,
        remaining: usize,
        backward: &[BTreeSet<EntityId>],
        memo: &mut HashMap<(EntityId, usize), Rc<BTreeSet<Vec<RelationId>>>>,
    ) -> Rc<BTreeSet<Vec<RelationId>>> {
        if let Some(cached) = memo.get(&(e, remaining)) {
            return Rc::clone(cached);
        }
        let mut set = BTreeSet::new();
        if remaining == 0 {
            if e == dst {
                set.insert(Vec::new());
            }
        } else {
            for (r, n) in graph.neighbors(e, Direction::Forward) {
                if !backward[remaining - 1].contains(&n) {
                    continue;
                }
                for suffix in suffixes(graph, dst, n, remaining - 1, backward, memo).iter() {
                    let mut seq = Vec::with_capacity(remaining);
                    seq.push(r);
                    seq.extend_from_slice(suffix);
                    set.insert(seq);
                }
            }
        }
        let rc = Rc::new(set);
        memo.insert((e, remaining), Rc::clone(&rc));
        rc
    }

    let mut memo = HashMap::new();
    let sequences = suffixes(graph, dst, src, len, &backward, &mut memo);
    let mut out = BTreeSet::new();
    for seq in sequences.iter() {
        out.insert(RelationPath::new(seq.clone())?);
    }
    Ok(out)
}

/// All reasoning paths of length 1..=`max_len` from `start`, in depth-first
/// preorder with sorted adjacency (each path precedes its extensions).
pub fn enumerate_reasoning_paths<G: GraphView>(
    graph: &G,
    start: EntityId,
    max_len: usize,
    cap: usize,
) -> Result<Grounded> {
    if !graph.has_entity(start) {
        return Err(Error::UnknownEntity(start));
    }

    fn walk<G: GraphView>(
        graph: &G,
        current: &mut ReasoningPath,
        max_len: usize,
        cap: usize,
        out: &mut Vec<ReasoningPath>,
        truncated: &mut bool,
    ) -> bool {
        for (r, next) in graph.neighbors(current.terminal(), Direction::Forward) {
            if out.len() >= cap {
                *truncated = true;
                return false;
            }
            current.steps.push((r, next));
            out.push(current.clone());
            let keep_going = if current.hop_count() < max_len {
                walk(graph, current, max_len, cap, out, truncated)
            } else {
                true
            };
            current.steps.pop();
            if !keep_going {
                return false;
            }
        }
        true
    }

    let mut out = Vec::new();
    let mut truncated = false;
    let mut current = ReasoningPath {
        start,
        steps: Vec::new(),
    };
    if max_len > 0 {
        walk(graph, &mut current, max_len, cap, &mut out, &mut truncated);
    }
    Ok(Grounded {
        paths: out,
        truncated,
    })
}
