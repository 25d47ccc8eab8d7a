//! Perturbation crafting: choose which triples to insert so that misleading
//! inference chains lead from the question's topic entities to the
//! attacker's targets.
//!
//! Two attack modes plus a noise baseline:
//!
//! * **Grounded prefix** — ground the first l−1 relations of an attack path
//!   in the real graph and attach one forged edge from each grounded
//!   endpoint to the target. Cheapest and stealthiest: one insertion
//!   completes a chain of otherwise-genuine triples.
//! * **Fallback bridge** — when the prefix grounds nowhere, fabricate the
//!   whole chain through randomly sampled bridge entities, preserving the
//!   intended relation pattern at the cost of more insertions.
//! * **Random corruption** — budget-matched control: corrupt one endpoint
//!   of triples incident to the topic, with no chain structure at all.
//!
//! Every emitted triple uses existing vocabulary and is absent from the base
//! graph; per-target counts never exceed the budget.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::AdversarialTargetSet;
use crate::error::{Error, Result};
use crate::grounding::{terminal_of_prefix, RelationPath};
use crate::kg::{EntityId, GraphView, KnowledgeGraph, PoisonedGraph, Triple};
use crate::seeding::derive_rng;

/// How a planted triple was constructed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    GroundedPrefix,
    FallbackBridge,
    RandomCorruption,
}

/// One inserted triple with its provenance. `chain` groups the constituents
/// of a single attack chain (a grounded-prefix edge is a chain of one), so
/// detection can ask whether a complete chain was retrieved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedTriple {
    pub triple: Triple,
    pub mode: PerturbationMode,
    /// Attack path this triple serves; absent for random corruption.
    pub source_path: Option<RelationPath>,
    pub chain: u32,
}

/// All triples planted for one target (or for the untargeted baseline).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationEntry {
    /// `None` marks the untargeted random-corruption baseline.
    pub target: Option<EntityId>,
    pub planted: Vec<PlantedTriple>,
}

/// The full set of triples to insert for one question.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSet {
    pub question_id: String,
    /// Per-target insertion budget K (total budget for the baseline).
    pub budget_per_target: usize,
    pub entries: Vec<PerturbationEntry>,
}

impl PerturbationSet {
    /// A set that plants nothing — used for questions with no usable
    /// targets or paths, which are still evaluated (the attack simply
    /// did not happen).
    pub fn empty(question_id: &str, budget_per_target: usize) -> Self {
        PerturbationSet {
            question_id: question_id.to_string(),
            budget_per_target,
            entries: Vec::new(),
        }
    }

    /// The flattened insertion set. A triple shared by two targets' chains
    /// is inserted once (set semantics) though it counts against both
    /// targets' budgets.
    pub fn all_triples(&self) -> BTreeSet<Triple> {
        self.entries
            .iter()
            .flat_map(|e| e.planted.iter().map(|p| p.triple))
            .collect()
    }

    /// Distinct inserted triples after global deduplication.
    pub fn total_inserted(&self) -> usize {
        self.all_triples().len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(|e| e.planted.is_empty())
    }
}

/// Bounded number of fresh-bridge rounds per target before giving up on an
/// unfilled budget; keeps crafting O(rounds · paths · topics) in the worst
/// case.
const FALLBACK_ROUNDS: usize = 8;

/// Craft up to `budget_k` insertions per adversarial target.
///
/// Targets are processed in priority order. For each, attack paths are
/// tried in order: first grounded-prefix proposals over every topic entity
/// (grounded terminals consumed in ascending entity-id order), then — if the
/// budget is still unfilled — whole-chain fallback bridges with seeded
/// uniform bridge sampling. Chains are accepted whole or not at all so a
/// planted entry is always a complete route to its target. Deterministic
/// for fixed `(seed, question id)`.
pub fn craft_perturbations(
    graph: &KnowledgeGraph,
    topic_entities: &[EntityId],
    targets: &AdversarialTargetSet,
    paths: &[RelationPath],
    budget_k: usize,
    seed: u64,
) -> Result<PerturbationSet> {
    if budget_k == 0 {
        return Err(Error::Precondition(
            "perturbation budget must be ≥ 1".into(),
        ));
    }
    if targets.is_empty() {
        return Err(Error::EmptyTargetSet);
    }
    if paths.is_empty() {
        return Err(Error::EmptyPathSet);
    }
    if topic_entities.is_empty() {
        return Err(Error::Precondition("question has no topic entities".into()));
    }
    for &topic in topic_entities {
        if !graph.has_entity(topic) {
            return Err(Error::UnknownEntity(topic));
        }
    }

    let mut rng = derive_rng(seed, &targets.question_id, "craft");
    let mut entries = Vec::with_capacity(targets.targets.len());
    let mut chain_counter: u32 = 0;

    for target in &targets.targets {
        let goal = target.entity;
        let mut planted: Vec<PlantedTriple> = Vec::new();

        // Phase 1: grounded prefixes. Ground w' = (r1..r_{l-1}) in the real
        // graph and forge only the final hop onto the target.
        'paths: for path in paths {
            let rels = path.relations();
            let (prefix, last) = rels.split_at(rels.len() - 1);
            let last = last[0];
            for &topic in topic_entities {
                for anchor in terminal_of_prefix(graph, topic, prefix)? {
                    if planted.len() >= budget_k {
                        break 'paths;
                    }
                    let triple = Triple::new(anchor, last, goal);
                    if graph.contains_triple(&triple) || planted.iter().any(|p| p.triple == triple)
                    {
                        continue;
                    }
                    planted.push(PlantedTriple {
                        triple,
                        mode: PerturbationMode::GroundedPrefix,
                        source_path: Some(path.clone()),
                        chain: chain_counter,
                    });
                    chain_counter += 1;
                }
            }
        }

        // Phase 2: fallback bridges for whatever budget remains.
        'rounds: for _ in 0..FALLBACK_ROUNDS {
            if planted.len() >= budget_k {
                break;
            }
            for path in paths {
                for &topic in topic_entities {
                    if planted.len() >= budget_k {
                        break 'rounds;
                    }
                    let chain =
                        sample_bridge_chain(graph, topic, goal, topic_entities, path, &mut rng);
                    let Some(chain) = chain else { continue };
                    let to_insert: Vec<Triple> = chain
                        .iter()
                        .copied()
                        .filter(|t| {
                            !graph.contains_triple(t) && !planted.iter().any(|p| p.triple == *t)
                        })
                        .collect();
                    // Whole chain or nothing: a partial chain would charge
                    // budget for a route that cannot reach the target.
                    if to_insert.is_empty() || planted.len() + to_insert.len() > budget_k {
                        continue;
                    }
                    for triple in to_insert {
                        planted.push(PlantedTriple {
                            triple,
                            mode: PerturbationMode::FallbackBridge,
                            source_path: Some(path.clone()),
                            chain: chain_counter,
                        });
                    }
                    chain_counter += 1;
                }
            }
        }

        entries.push(PerturbationEntry {
            target: Some(goal),
            planted,
        });
    }

    Ok(PerturbationSet {
        question_id: targets.question_id.clone(),
        budget_per_target: budget_k,
        entries,
    })
}

/// Build one candidate fallback chain topic →r1 b1 →r2 … →rl goal with l−1
/// distinct bridges sampled uniformly from E \ (topics ∪ {goal}). `None`
/// when the entity pool is too small.
fn sample_bridge_chain(
    graph: &KnowledgeGraph,
    topic: EntityId,
    goal: EntityId,
    topic_entities: &[EntityId],
    path: &RelationPath,
    rng: &mut impl Rng,
) -> Option<Vec<Triple>> {
    let rels = path.relations();
    let bridges_needed = rels.len() - 1;
    let mut nodes = Vec::with_capacity(rels.len() + 1);
    nodes.push(topic);
    if bridges_needed > 0 {
        let pool: Vec<EntityId> = graph
            .entities()
            .filter(|e| *e != goal && !topic_entities.contains(e))
            .collect();
        if pool.len() < bridges_needed {
            return None;
        }
        for idx in rand::seq::index::sample(rng, pool.len(), bridges_needed) {
            nodes.push(pool[idx]);
        }
    }
    nodes.push(goal);
    Some(
        rels.iter()
            .enumerate()
            .map(|(i, &r)| Triple::new(nodes[i], r, nodes[i + 1]))
            .collect(),
    )
}

/// Budget-matched noise control: corrupt `count` triples incident to the
/// topic entities by resampling the non-topic endpoint uniformly from E.
/// Corruptions that already exist in T, duplicate an earlier draw, or land
/// back on a topic entity are discarded and redrawn (bounded), so every
/// emitted triple is novel and shares exactly one endpoint with a topic.
pub fn random_corruption_baseline(
    graph: &KnowledgeGraph,
    question_id: &str,
    topic_entities: &[EntityId],
    count: usize,
    seed: u64,
) -> Result<PerturbationSet> {
    let incident: Vec<Triple> = graph
        .triples()
        .into_iter()
        .filter(|t| topic_entities.contains(&t.head) || topic_entities.contains(&t.tail))
        .collect();
    if incident.is_empty() {
        return Err(Error::IsolatedTopicEntity);
    }

    let mut rng = derive_rng(seed, question_id, "baseline");
    let mut planted: Vec<PlantedTriple> = Vec::new();
    let mut attempts = count * 50 + 200;
    while planted.len() < count && attempts > 0 {
        attempts -= 1;
        let source = incident[rng.gen_range(0..incident.len())];
        let replacement = EntityId(rng.gen_range(0..graph.entity_count() as u32));
        if topic_entities.contains(&replacement) {
            continue;
        }
        // Keep the topic endpoint, replace the other; when both ends are
        // topics the tail is the one corrupted.
        let corrupted = if topic_entities.contains(&source.head) {
            Triple::new(source.head, source.relation, replacement)
        } else {
            Triple::new(replacement, source.relation, source.tail)
        };
        if graph.contains_triple(&corrupted) || planted.iter().any(|p| p.triple == corrupted) {
            continue;
        }
        planted.push(PlantedTriple {
            triple: corrupted,
            mode: PerturbationMode::RandomCorruption,
            source_path: None,
            chain: planted.len() as u32,
        });
    }

    Ok(PerturbationSet {
        question_id: question_id.to_string(),
        budget_per_target: count,
        entries: vec![PerturbationEntry {
            target: None,
            planted,
        }],
    })
}

/// Realize the poisoned graph — base triples plus the planted set — as an
/// overlay. A stealth violation here means the set was crafted against a
/// different graph: an internal error, since both constructors only emit
/// in-vocabulary triples.
pub fn apply_perturbations<'g>(
    graph: &'g KnowledgeGraph,
    pset: &PerturbationSet,
) -> Result<PoisonedGraph<'g>> {
    let triples: Vec<Triple> = pset.all_triples().into_iter().collect();
    graph.insert_triples(&triples)
}

/// Label-level rendering of one planted triple, for reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlantedTripleDump {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub mode: PerturbationMode,
    pub chain: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_path: Option<String>,
}

/// Label-level rendering of a perturbation entry.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbationEntryDump {
    /// Target label, or `None` for the untargeted baseline.
    pub target: Option<String>,
    pub planted: Vec<PlantedTripleDump>,
}

/// Label-level rendering of a whole perturbation set, as written to the
/// perturbation dump file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbationSetDump {
    pub question_id: String,
    pub budget_per_target: usize,
    pub inserted_total: usize,
    pub entries: Vec<PerturbationEntryDump>,
}

/// Render a perturbation set with human-readable labels.
pub fn dump_perturbations(graph: &impl GraphView, pset: &PerturbationSet) -> PerturbationSetDump {
    PerturbationSetDump {
        question_id: pset.question_id.clone(),
        budget_per_target: pset.budget_per_target,
        inserted_total: pset.total_inserted(),
        entries: pset
            .entries
            .iter()
            .map(|entry| PerturbationEntryDump {
                target: entry.target.map(|e| graph.entity_label(e).to_string()),
                planted: entry
                    .planted
                    .iter()
                    .map(|p| PlantedTripleDump {
                        head: graph.entity_label(p.triple.head).to_string(),
                        relation: graph.relation_label(p.triple.relation).to_string(),
                        tail: graph.entity_label(p.triple.tail).to_string(),
                        mode: p.mode,
                        chain: p.chain,
                        source_path: p.source_path.as_ref().map(|w| w.render(graph)),
                    })
                    .collect(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::AdversarialTarget;
    use crate::fixtures::film_graph;
    use crate::grounding::{ground_relation_path, terminal_entities};

    fn target_set(graph: &KnowledgeGraph, labels: &[&str]) -> AdversarialTargetSet {
        AdversarialTargetSet {
            question_id: "q".to_string(),
            targets: labels
                .iter()
                .map(|l| AdversarialTarget {
                    entity: graph.entity_id(l).unwrap(),
                    raw_candidate: l.to_string(),
                    similarity: 1.0,
                })
                .collect(),
            requested_n: labels.len(),
        }
    }

    fn rp(graph: &KnowledgeGraph, labels: &[&str]) -> RelationPath {
        RelationPath::new(
            labels
                .iter()
                .map(|l| graph.relation_id(l).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn grounded_prefix_inserts_the_single_redirect_edge() {
        let g = film_graph();
        let mbts = g.entity_id("Manchester by the Sea").unwrap();
        let targets = target_set(&g, &["UK"]);
        let paths = vec![rp(&g, &["filmed_in_city", "city_in_country"])];
        let pset = craft_perturbations(&g, &[mbts], &targets, &paths, 1, 11).unwrap();

        assert_eq!(pset.entries.len(), 1);
        let planted = &pset.entries[0].planted;
        assert_eq!(planted.len(), 1);
        assert_eq!(planted[0].mode, PerturbationMode::GroundedPrefix);
        assert_eq!(
            planted[0].triple,
            Triple::new(
                g.entity_id("Manchester MA").unwrap(),
                g.relation_id("city_in_country").unwrap(),
                g.entity_id("UK").unwrap(),
            )
        );
    }

    #[test]
    fn ungroundable_prefix_falls_back_to_a_bridge_pair() {
        let g = film_graph();
        let mbts = g.entity_id("Manchester by the Sea").unwrap();
        let uk = g.entity_id("UK").unwrap();
        let targets = target_set(&g, &["UK"]);
        // containedIn never leaves MBTS, so the prefix grounds nowhere.
        let path = rp(&g, &["containedIn", "city_in_country"]);
        let pset =
            craft_perturbations(&g, &[mbts], &targets, std::slice::from_ref(&path), 2, 11).unwrap();

        let planted = &pset.entries[0].planted;
        assert_eq!(planted.len(), 2);
        assert!(planted
            .iter()
            .all(|p| p.mode == PerturbationMode::FallbackBridge));
        assert_eq!(planted[0].chain, planted[1].chain);
        // Chain shape: (MBTS, containedIn, bridge), (bridge, city_in_country, UK).
        assert_eq!(planted[0].triple.head, mbts);
        assert_eq!(planted[0].triple.tail, planted[1].triple.head);
        assert_eq!(planted[1].triple.tail, uk);
        let bridge = planted[0].triple.tail;
        assert_ne!(bridge, mbts);
        assert_ne!(bridge, uk);
        // The planted chain grounds end to end over the overlay.
        let poisoned = apply_perturbations(&g, &pset).unwrap();
        let grounded = ground_relation_path(&poisoned, mbts, &path, 100).unwrap();
        assert!(grounded.paths.iter().any(|p| p.terminal() == uk));
    }

    #[test]
    fn proposals_already_in_the_graph_are_skipped_without_spending_budget() {
        let g = film_graph();
        let mbts = g.entity_id("Manchester by the Sea").unwrap();
        // Target the true answer: the only grounded proposal already exists
        // in T, and the 2-triple fallback chain exceeds k=1.
        let targets = target_set(&g, &["USA"]);
        let paths = vec![rp(&g, &["filmed_in_city", "city_in_country"])];
        let pset = craft_perturbations(&g, &[mbts], &targets, &paths, 1, 11).unwrap();
        assert!(pset.entries[0].planted.is_empty());
        assert_eq!(pset.total_inserted(), 0);
    }

    #[test]
    fn budget_is_an_upper_bound_and_chains_complete() {
        let g = film_graph();
        let mbts = g.entity_id("Manchester by the Sea").unwrap();
        let targets = target_set(&g, &["UK", "England", "Wales"]);
        let paths = vec![
            rp(&g, &["filmed_in_city", "city_in_country"]),
            rp(&g, &["containedIn"]),
            rp(&g, &["locatedIn", "containedIn"]),
        ];
        let k = 4;
        let pset = craft_perturbations(&g, &[mbts], &targets, &paths, k, 23).unwrap();
        let poisoned = apply_perturbations(&g, &pset).unwrap();

        for entry in &pset.entries {
            assert!(entry.planted.len() <= k, "budget exceeded");
            let goal = entry.target.unwrap();
            if entry.planted.is_empty() {
                continue;
            }
            // Completion: some source path grounds from the topic to the
            // target over the poisoned overlay.
            let reached = entry.planted.iter().any(|p| {
                let path = p.source_path.as_ref().unwrap();
                terminal_entities(&poisoned, mbts, path)
                    .unwrap()
                    .contains(&goal)
            });
            assert!(reached, "no planted route reaches the target");
        }
        assert!(pset.total_inserted() <= k * targets.targets.len());
        // Stealth: nothing planted pre-exists in the base graph.
        for t in pset.all_triples() {
            assert!(!g.contains_triple(&t));
        }
    }

    #[test]
    fn crafting_is_deterministic_per_seed() {
        let g = film_graph();
        let mbts = g.entity_id("Manchester by the Sea").unwrap();
        let targets = target_set(&g, &["UK", "Cardiff"]);
        // Force fallback sampling so determinism covers the RNG path.
        let paths = vec![rp(&g, &["containedIn", "city_in_country"])];
        let a = craft_perturbations(&g, &[mbts], &targets, &paths, 3, 5).unwrap();
        let b = craft_perturbations(&g, &[mbts], &targets, &paths, 3, 5).unwrap();
        assert_eq!(a, b);
        let c = craft_perturbations(&g, &[mbts], &targets, &paths, 3, 6).unwrap();
        // A different seed may pick different bridges (not guaranteed to
        // differ, but the pools here make collision very unlikely).
        assert_eq!(c.entries.len(), a.entries.len());
    }

    #[test]
    fn craft_preconditions_are_enforced() {
        let g = film_graph();
        let mbts = g.entity_id("Manchester by the Sea").unwrap();
        let targets = target_set(&g, &["UK"]);
        let paths = vec![rp(&g, &["containedIn"])];
        assert!(matches!(
            craft_perturbations(&g, &[mbts], &targets, &paths, 0, 1),
            Err(Error::Precondition(_))
        ));
        let empty_targets = AdversarialTargetSet {
            question_id: "q".into(),
            targets: Vec::new(),
            requested_n: 5,
        };
        assert!(matches!(
            craft_perturbations(&g, &[mbts], &empty_targets, &paths, 1, 1),
            Err(Error::EmptyTargetSet)
        ));
        assert!(matches!(
            craft_perturbations(&g, &[mbts], &targets, &[], 1, 1),
            Err(Error::EmptyPathSet)
        ));
        assert!(matches!(
            craft_perturbations(&g, &[], &targets, &paths, 1, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn baseline_corruptions_touch_exactly_one_topic_endpoint() {
        let g = film_graph();
        let mbts = g.entity_id("Manchester by the Sea").unwrap();
        let pset = random_corruption_baseline(&g, "q", &[mbts], 3, 9).unwrap();
        let planted = &pset.entries[0].planted;
        assert!(!planted.is_empty());
        for p in planted {
            assert_eq!(p.mode, PerturbationMode::RandomCorruption);
            assert!(p.source_path.is_none());
            assert!(!g.contains_triple(&p.triple));
            let head_is_topic = p.triple.head == mbts;
            let tail_is_topic = p.triple.tail == mbts;
            assert!(head_is_topic ^ tail_is_topic);
        }
        // MBTS has a single incident triple, so every corruption keeps its
        // head and relation and swaps the tail.
        for p in planted {
            assert_eq!(p.triple.head, mbts);
            assert_eq!(p.triple.relation, g.relation_id("filmed_in_city").unwrap());
            assert_ne!(p.triple.tail, g.entity_id("Manchester MA").unwrap());
        }
        // Determinism.
        assert_eq!(
            pset,
            random_corruption_baseline(&g, "q", &[mbts], 3, 9).unwrap()
        );
    }

    #[test]
    fn baseline_count_zero_is_empty_and_isolation_errors() {
        let g = film_graph();
        let mbts = g.entity_id("Manchester by the Sea").unwrap();
        let pset = random_corruption_baseline(&g, "q", &[mbts], 0, 9).unwrap();
        assert!(pset.all_triples().is_empty());
        assert!(matches!(
            random_corruption_baseline(&g, "q", &[], 1, 9),
            Err(Error::IsolatedTopicEntity)
        ));
    }

    #[test]
    fn applying_perturbations_grows_terminals_toward_targets() {
        let g = film_graph();
        let mbts = g.entity_id("Manchester by the Sea").unwrap();
        let empty = PerturbationSet::empty("q", 4);
        let unchanged = apply_perturbations(&g, &empty).unwrap();
        assert_eq!(unchanged.triple_count(), g.triple_count());

        let targets = target_set(&g, &["UK"]);
        let path = rp(&g, &["filmed_in_city", "city_in_country"]);
        let pset =
            craft_perturbations(&g, &[mbts], &targets, std::slice::from_ref(&path), 1, 11).unwrap();
        let poisoned = apply_perturbations(&g, &pset).unwrap();
        assert_eq!(poisoned.triple_count(), g.triple_count() + 1);
        assert_eq!(
            terminal_entities(&poisoned, mbts, &path).unwrap(),
            [g.entity_id("USA").unwrap(), g.entity_id("UK").unwrap()]
                .into_iter()
                .collect()
        );
    }

    #[test]
    fn dump_renders_labels_and_modes() {
        let g = film_graph();
        let mbts = g.entity_id("Manchester by the Sea").unwrap();
        let targets = target_set(&g, &["UK"]);
        let paths = vec![rp(&g, &["filmed_in_city", "city_in_country"])];
        let pset = craft_perturbations(&g, &[mbts], &targets, &paths, 1, 11).unwrap();
        let dump = dump_perturbations(&g, &pset);
        assert_eq!(dump.inserted_total, 1);
        assert_eq!(dump.entries[0].target.as_deref(), Some("uk"));
        let p = &dump.entries[0].planted[0];
        assert_eq!(
            (p.head.as_str(), p.relation.as_str(), p.tail.as_str()),
            ("manchester ma", "city_in_country", "uk")
        );
        assert_eq!(
            p.source_path.as_deref(),
            Some("filmed_in_city -> city_in_country")
        );
        // Round-trips through JSON for the dump file.
        let line = serde_json::to_string(&dump).unwrap();
        let back: PerturbationSetDump = serde_json::from_str(&line).unwrap();
        assert_eq!(back.inserted_total, 1);
    }
}
