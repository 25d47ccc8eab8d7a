//! Shared test infrastructure: naive reference implementations (oracles)
//! and seeded random graph generation.
//!
//! The oracles deliberately avoid the library's adjacency indexes — they
//! scan the flat triple list at every step — so an indexing bug cannot hide
//! by appearing on both sides of a comparison.
//!
//! Path-semantics conventions shared with the library (these are the
//! definitions both sides implement, not shortcuts): revisits and cycles
//! are allowed; a relation path is a nonempty relation sequence, so the
//! zero-length connection from an entity to itself is never reported —
//! `shortest(src, src)` is empty even when self-loops exist.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kgpoison::grounding::RelationPath;
use kgpoison::kg::{EntityId, GraphView, KnowledgeGraph, RelationId, Triple};

/// Brute-force grounding: every step sequence following `relations` from
/// `start`, found by scanning the full triple list at each hop.
pub fn naive_ground(
    triples: &[Triple],
    start: EntityId,
    relations: &[RelationId],
) -> BTreeSet<Vec<(RelationId, EntityId)>> {
    let mut partial: Vec<Vec<(RelationId, EntityId)>> = vec![Vec::new()];
    for &rel in relations {
        let mut next = Vec::new();
        for steps in partial {
            let cursor = steps.last().map_or(start, |s| s.1);
            for t in triples {
                if t.head == cursor && t.relation == rel {
                    let mut extended = steps.clone();
                    extended.push((rel, t.tail));
                    next.push(extended);
                }
            }
        }
        partial = next;
        if partial.is_empty() {
            break;
        }
    }
    partial.into_iter().collect()
}

/// Terminal set of the naive grounding.
pub fn naive_terminals(
    triples: &[Triple],
    start: EntityId,
    relations: &[RelationId],
) -> BTreeSet<EntityId> {
    naive_ground(triples, start, relations)
        .into_iter()
        .filter_map(|steps| steps.last().map(|s| s.1))
        .collect()
}

/// Whether following `relations` from `src` can end at `dst`, tracked as a
/// frontier set (no path enumeration, so it stays cheap on dense graphs).
fn naive_reaches(
    triples: &[Triple],
    src: EntityId,
    relations: &[RelationId],
    dst: EntityId,
) -> bool {
    let mut frontier: BTreeSet<EntityId> = BTreeSet::new();
    frontier.insert(src);
    for &rel in relations {
        let mut next = BTreeSet::new();
        for t in triples {
            if t.relation == rel && frontier.contains(&t.head) {
                next.insert(t.tail);
            }
        }
        frontier = next;
        if frontier.is_empty() {
            return false;
        }
    }
    frontier.contains(&dst)
}

/// Exhaustive shortest relation paths: try every relation sequence of each
/// length in turn (|R|^l sequences) and return the full set at the first
/// length where any sequence connects `src` to `dst`.
pub fn exhaustive_shortest_paths(
    graph: &impl GraphView,
    src: EntityId,
    dst: EntityId,
    max_hops: usize,
) -> BTreeSet<RelationPath> {
    if src == dst {
        return BTreeSet::new();
    }
    let triples = graph.triples();
    let relation_count = graph.relation_count();
    for len in 1..=max_hops {
        let mut found = BTreeSet::new();
        let mut seq = vec![0usize; len];
        loop {
            let relations: Vec<RelationId> = seq.iter().map(|&r| RelationId(r as u32)).collect();
            if naive_reaches(&triples, src, &relations, dst) {
                found.insert(RelationPath::new(relations).unwrap());
            }
            // Advance the sequence like a base-|R| counter.
            let mut pos = 0;
            loop {
                if pos == len {
                    break;
                }
                seq[pos] += 1;
                if seq[pos] < relation_count {
                    break;
                }
                seq[pos] = 0;
                pos += 1;
            }
            if pos == len {
                break;
            }
        }
        if !found.is_empty() {
            return found;
        }
    }
    BTreeSet::new()
}

/// A seeded random graph: 3–`max_entities` entities, 1–`max_relations`
/// relations, and a bounded number of uniform random triples (duplicates
/// collapse on interning). Always nonempty.
pub fn random_graph(
    rng: &mut ChaCha8Rng,
    max_entities: usize,
    max_relations: usize,
) -> KnowledgeGraph {
    let n = rng.gen_range(3..=max_entities);
    let m = rng.gen_range(1..=max_relations);
    let count = rng.gen_range(n..=(n * 6).max(n + 1));
    let mut triples = Vec::with_capacity(count);
    for _ in 0..count {
        let h = rng.gen_range(0..n);
        let r = rng.gen_range(0..m);
        let t = rng.gen_range(0..n);
        triples.push((format!("e{h}"), format!("r{r}"), format!("e{t}")));
    }
    KnowledgeGraph::from_raw_triples(
        triples
            .iter()
            .map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str())),
    )
}

/// Deterministic RNG for a test, namespaced so suites never share streams.
pub fn test_rng(label: &str) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    for (i, b) in label.bytes().enumerate() {
        seed[i % 32] ^= b;
    }
    ChaCha8Rng::from_seed(seed)
}
