//! Synthetic closed-loop benchmark generator.
//!
//! Each question's graph is built so the end-to-end pipeline has provable
//! behavior:
//!
//! * one gold chain `topic →ra middle →rb gold` that is the *unique*
//!   shortest route (and unique grounding) from topic to gold — a clean run
//!   with the oracle planner, path retriever, and mock generator must score
//!   Hit = EM = 1.0;
//! * a small distractor fan (`rc`/`rd` edges) giving the attacker's stub
//!   candidate generator exactly six answer-like entities to target, every
//!   one of them reachable by grounded prefixes — so crafted insertions are
//!   grounded-prefix edges the path retriever is guaranteed to pick up;
//! * a large padding ring, disconnected from the topic, that dilutes the
//!   random-corruption baseline: a random replacement endpoint almost never
//!   lands somewhere that changes planning, while the targeted attack
//!   always does.
//!
//! Labels are drawn from a shared pool (default 200 entities), so the
//! benchmark as a whole exercises vocabulary reuse across questions.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::dataset::QuestionRecord;
use crate::seeding::derive_rng;

/// Shape of the generated benchmark.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub questions: usize,
    /// Size of the shared entity-label pool.
    pub entity_pool: usize,
    /// Entities in the padding ring of each question's graph.
    pub padding_entities: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            questions: 50,
            entity_pool: 200,
            padding_entities: 53,
            seed: 17,
        }
    }
}

/// Distinct roles in one question graph, beyond the padding ring.
const ROLE_COUNT: usize = 7;
/// Relation labels available to the sampler.
const RELATION_POOL: usize = 8;

/// Generate the benchmark as in-memory records (JSONL-compatible).
///
/// Per question: roles T (topic), M (middle), G (gold), D1..D4
/// (distractors), plus the padding ring P0..Pk. Triples:
///
/// ```text
/// (T, ra, M)   (M, rb, G)                      gold chain
/// (T, rc, D1)  (T, rc, D2)                     distractor fan
/// (D1, rd, D3) (D2, rd, D4)                    distractor continuations
/// (P0, rd, P1) (P1, rd, P2) … (Pk, rd, P0)     padding ring
/// ```
///
/// Deterministic for a fixed config.
pub fn generate_benchmark(config: &SyntheticConfig) -> Vec<QuestionRecord> {
    assert!(
        config.entity_pool >= ROLE_COUNT + config.padding_entities,
        "entity pool too small for roles plus padding"
    );
    assert!(
        config.padding_entities >= 2,
        "padding ring needs two entities"
    );
    let mut records = Vec::with_capacity(config.questions);
    for i in 0..config.questions {
        let id = format!("syn{i:03}");
        let mut rng = derive_rng(config.seed, &id, "synthetic");

        let picked = sample(
            &mut rng,
            config.entity_pool,
            ROLE_COUNT + config.padding_entities,
        );
        let label = |slot: usize| format!("ent_{:03}", picked.index(slot));
        let (t, m, g) = (label(0), label(1), label(2));
        let (d1, d2, d3, d4) = (label(3), label(4), label(5), label(6));
        let padding: Vec<String> = (0..config.padding_entities)
            .map(|j| label(ROLE_COUNT + j))
            .collect();

        let rels = sample(&mut rng, RELATION_POOL, 4);
        let rel = |slot: usize| format!("rel_{}", rels.index(slot));
        let (ra, rb, rc, rd) = (rel(0), rel(1), rel(2), rel(3));

        let mut graph: Vec<(String, String, String)> = vec![
            (t.clone(), ra.clone(), m.clone()),
            (m.clone(), rb.clone(), g.clone()),
            (t.clone(), rc.clone(), d1.clone()),
            (t.clone(), rc.clone(), d2.clone()),
            (d1.clone(), rd.clone(), d3.clone()),
            (d2.clone(), rd.clone(), d4.clone()),
        ];
        for j in 0..config.padding_entities {
            graph.push((
                padding[j].clone(),
                rd.clone(),
                padding[(j + 1) % config.padding_entities].clone(),
            ));
        }

        records.push(QuestionRecord {
            id,
            question: format!("which entity does {t} reach via {ra} and then {rb}"),
            q_entity: vec![t],
            a_entity: vec![g],
            graph,
        });
    }
    records
}
