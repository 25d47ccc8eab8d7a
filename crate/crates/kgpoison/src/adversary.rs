//! Adversarial target selection: the attacker's first stage.
//!
//! A text-generation client proposes plausible-but-wrong answers for a
//! question (the attacker never sees gold answers), and fuzzy string
//! alignment maps those free-text candidates onto entities that actually
//! exist in the question's graph — the attack can only redirect reasoning
//! toward vocabulary that is already there.
//!
//! A deterministic stub generator replaces the remote client in tests and
//! closed-loop experiments, proposing nearby graph entities instead of LLM
//! output.

use serde::{Deserialize, Serialize};

use crate::client::TextGenClient;
use crate::error::{Error, Result};
use crate::kg::{Direction, EntityId, GraphView, KnowledgeGraph};
use crate::seeding::derive_rng;
use crate::text::{normalize, similarity, strip_list_marker};

/// Prompt template asking for misleading candidate answers; `{question}` is
/// interpolated. Stored as a versioned resource so reports can pin it.
pub const CANDIDATE_PROMPT_TEMPLATE: &str =
    include_str!("../resources/templates/adversarial_answers.txt");

/// One aligned adversarial target: the KG entity, the raw string that
/// matched it, and how well it matched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialTarget {
    pub entity: EntityId,
    pub raw_candidate: String,
    pub similarity: f64,
}

/// The attacker's target set Â for one question, in priority order
/// (candidate generation order — the only ranking signal available).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialTargetSet {
    pub question_id: String,
    pub targets: Vec<AdversarialTarget>,
    pub requested_n: usize,
}

impl AdversarialTargetSet {
    pub fn entities(&self) -> Vec<EntityId> {
        self.targets.iter().map(|t| t.entity).collect()
    }

    pub fn labels<'g>(&self, graph: &'g impl GraphView) -> Vec<&'g str> {
        self.targets
            .iter()
            .map(|t| graph.entity_label(t.entity))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Fill the candidate prompt template for a question.
pub fn render_candidate_prompt(question: &str) -> String {
    CANDIDATE_PROMPT_TEMPLATE.replace("{question}", question)
}

/// Split one raw completion into candidate strings: one candidate per line,
/// list markers stripped, blanks dropped.
fn parse_candidates(completion: &str) -> Vec<String> {
    completion
        .lines()
        .map(strip_list_marker)
        .filter(|line| !line.is_empty())
        .map(|line| line.to_string())
        .collect()
}

/// Ask the client for misleading answers over several generation rounds and
/// concatenate the raw candidates in arrival order. Duplicates are retained
/// deliberately: alignment dedupes by resolved entity, and repeated mentions
/// of "UK" versus "United Kingdom" should still collapse to one target.
pub fn generate_candidate_answers(
    question: &str,
    client: &dyn TextGenClient,
    rounds: u32,
    completions_per_round: u32,
) -> Result<Vec<String>> {
    if rounds == 0 {
        return Err(Error::Precondition(
            "candidate generation requires at least one round".into(),
        ));
    }
    let prompt = render_candidate_prompt(question);
    let mut candidates = Vec::new();
    for _ in 0..rounds {
        for completion in client.complete(&prompt, completions_per_round.max(1))? {
            candidates.extend(parse_candidates(&completion));
        }
    }
    Ok(candidates)
}

/// Best-matching entity for one candidate under normalized Levenshtein
/// similarity, scanning every entity label; ties break toward the lower
/// entity id. Returns `None` only for an entity-less graph.
fn best_entity_match(graph: &KnowledgeGraph, candidate_norm: &str) -> Option<(EntityId, f64)> {
    let mut best: Option<(EntityId, f64)> = None;
    for entity in graph.entities() {
        let score = similarity(candidate_norm, graph.entity_label(entity));
        match best {
            Some((_, s)) if score <= s => {}
            _ => best = Some((entity, score)),
        }
    }
    best
}

/// Align raw candidate strings to KG entities: per candidate, take the
/// globally best-matching entity label; drop matches below `threshold` and
/// matches that resolve to a topic entity; keep the first `n` distinct
/// entities in candidate order.
pub fn align_candidates_to_kg(
    question_id: &str,
    candidates: &[String],
    graph: &KnowledgeGraph,
    topic_entities: &[EntityId],
    n: usize,
    threshold: f64,
) -> AdversarialTargetSet {
    let mut targets: Vec<AdversarialTarget> = Vec::new();
    for candidate in candidates {
        if targets.len() >= n {
            break;
        }
        let candidate_norm = normalize(candidate);
        if candidate_norm.is_empty() {
            continue;
        }
        let Some((entity, score)) = best_entity_match(graph, &candidate_norm) else {
            continue;
        };
        if score < threshold {
            continue;
        }
        if topic_entities.contains(&entity) {
            continue;
        }
        if targets.iter().any(|t| t.entity == entity) {
            continue;
        }
        targets.push(AdversarialTarget {
            entity,
            raw_candidate: candidate.clone(),
            similarity: score,
        });
    }
    AdversarialTargetSet {
        question_id: question_id.to_string(),
        targets,
        requested_n: n,
    }
}

/// Deterministic stand-in for the remote candidate generator: labels of
/// entities within two forward hops of the first topic entity (answer-like
/// neighborhood), topics excluded, in seeded shuffle order. Identical
/// `(question_id, seed)` always yields the identical list.
pub fn stub_candidate_generator(
    question_id: &str,
    graph: &KnowledgeGraph,
    topic_entities: &[EntityId],
    seed: u64,
) -> Vec<String> {
    let Some(&start) = topic_entities.first() else {
        return Vec::new();
    };
    let mut reachable = std::collections::BTreeSet::new();
    let mut frontier = vec![start];
    for _ in 0..2 {
        let mut next = Vec::new();
        for e in frontier {
            for (_, n) in graph.neighbors(e, Direction::Forward) {
                if reachable.insert(n) {
                    next.push(n);
                }
            }
        }
        frontier = next;
    }
    let mut labels: Vec<String> = reachable
        .into_iter()
        .filter(|e| !topic_entities.contains(e))
        .map(|e| graph.entity_label(e).to_string())
        .collect();
    let mut rng = derive_rng(seed, question_id, "stub-candidates");
    use rand::seq::SliceRandom;
    labels.shuffle(&mut rng);
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::film_graph;
    use std::sync::Mutex;

    /// Client returning a scripted sequence of completion batches.
    struct Scripted {
        batches: Mutex<Vec<Vec<String>>>,
    }

    impl Scripted {
        fn new(batches: Vec<Vec<&str>>) -> Self {
            Scripted {
                batches: Mutex::new(
                    batches
                        .into_iter()
                        .rev()
                        .map(|b| b.into_iter().map(String::from).collect())
                        .collect(),
                ),
            }
        }
    }

    impl TextGenClient for Scripted {
        fn complete(&self, _prompt: &str, _n: u32) -> Result<Vec<String>> {
            Ok(self.batches.lock().unwrap().pop().unwrap_or_default())
        }
    }

    #[test]
    fn candidate_generation_preserves_order_and_duplicates() {
        let client = Scripted::new(vec![vec!["- UK\n- France"], vec!["1. UK\n\n2) Wales"]]);
        let out = generate_candidate_answers("q", &client, 2, 1).unwrap();
        assert_eq!(out, vec!["UK", "France", "UK", "Wales"]);
    }

    #[test]
    fn zero_rounds_is_a_precondition_violation() {
        let client = Scripted::new(vec![]);
        assert!(matches!(
            generate_candidate_answers("q", &client, 0, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn empty_completion_yields_no_candidates() {
        let client = Scripted::new(vec![vec![""]]);
        let out = generate_candidate_answers("q", &client, 1, 1).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn prompt_interpolates_question() {
        let prompt = render_candidate_prompt("who wrote dune");
        assert!(prompt.contains("who wrote dune"));
        assert!(!prompt.contains("{question}"));
    }

    #[test]
    fn exact_normalized_match_scores_one() {
        let g = KnowledgeGraph::from_raw_triples(vec![("London", "capital_of", "United Kingdom")]);
        let topic = g.entity_id("London").unwrap();
        let set = align_candidates_to_kg(
            "q",
            &["  united   KINGDOM ".to_string()],
            &g,
            &[topic],
            5,
            0.8,
        );
        assert_eq!(set.targets.len(), 1);
        assert_eq!(
            set.targets[0].entity,
            g.entity_id("United Kingdom").unwrap()
        );
        assert!((set.targets[0].similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn topic_matches_are_excluded() {
        let g = film_graph();
        let topic = g.entity_id("Manchester by the Sea").unwrap();
        let set = align_candidates_to_kg(
            "q",
            &["manchester by the sea".to_string()],
            &g,
            &[topic],
            5,
            0.8,
        );
        assert!(set.targets.is_empty());
    }

    #[test]
    fn one_typo_in_seven_characters_clears_the_default_threshold() {
        let g = KnowledgeGraph::from_raw_triples(vec![("Berlin", "in", "Germany")]);
        let topic = g.entity_id("Berlin").unwrap();
        let set = align_candidates_to_kg("q", &["Germny".to_string()], &g, &[topic], 5, 0.8);
        assert_eq!(set.targets.len(), 1);
        assert!((set.targets[0].similarity - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn weak_matches_fall_below_threshold() {
        let g = film_graph();
        let topic = g.entity_id("Manchester by the Sea").unwrap();
        let set = align_candidates_to_kg("q", &["zzzzzzzzzzzz".to_string()], &g, &[topic], 5, 0.8);
        assert!(set.targets.is_empty());
    }

    #[test]
    fn similarity_ties_break_toward_lower_entity_id() {
        let g = KnowledgeGraph::from_raw_triples(vec![("aa", "r", "ab")]);
        let set = align_candidates_to_kg("q", &["ac".to_string()], &g, &[], 5, 0.4);
        assert_eq!(set.targets.len(), 1);
        assert_eq!(set.targets[0].entity, g.entity_id("aa").unwrap());
    }

    #[test]
    fn first_n_distinct_entities_in_candidate_order() {
        let g = film_graph();
        let topic = g.entity_id("Manchester by the Sea").unwrap();
        let candidates = vec![
            "uk".to_string(),
            "UK".to_string(), // same entity after normalization: deduped
            "wales".to_string(),
            "england".to_string(),
        ];
        let set = align_candidates_to_kg("q", &candidates, &g, &[topic], 2, 0.8);
        assert_eq!(set.targets.len(), 2);
        assert_eq!(set.targets[0].entity, g.entity_id("UK").unwrap());
        assert_eq!(set.targets[1].entity, g.entity_id("Wales").unwrap());
        assert_eq!(set.requested_n, 2);
    }

    #[test]
    fn aligned_targets_always_satisfy_the_contract() {
        let g = film_graph();
        let topic = g.entity_id("Manchester by the Sea").unwrap();
        let candidates: Vec<String> = vec![
            "usa",
            "uk",
            "wales",
            "cardiff",
            "england",
            "manchester ma",
            "nonsense",
        ]
        .into_iter()
        .map(String::from)
        .collect();
        let set = align_candidates_to_kg("q", &candidates, &g, &[topic], 5, 0.8);
        assert!(set.targets.len() <= 5);
        let mut seen = std::collections::BTreeSet::new();
        for t in &set.targets {
            assert!(g.has_entity(t.entity));
            assert_ne!(t.entity, topic);
            assert!(t.similarity >= 0.8);
            assert!(seen.insert(t.entity), "duplicate target entity");
        }
    }

    #[test]
    fn stub_candidates_come_from_the_two_hop_forward_neighborhood() {
        let g = film_graph();
        let topic = g.entity_id("Manchester by the Sea").unwrap();
        let out = stub_candidate_generator("q7", &g, &[topic], 7);
        assert!(!out.is_empty());
        for label in &out {
            assert!(
                label == "manchester ma" || label == "usa",
                "unexpected stub candidate {label}"
            );
        }
        // Determinism: same inputs, same list.
        assert_eq!(out, stub_candidate_generator("q7", &g, &[topic], 7));
        // A different question id may reorder but never changes the pool.
        let other = stub_candidate_generator("q8", &g, &[topic], 7);
        let as_set: std::collections::BTreeSet<_> = out.iter().collect();
        assert_eq!(as_set, other.iter().collect());
    }

    #[test]
    fn stub_with_no_outgoing_edges_is_empty() {
        let g = KnowledgeGraph::from_raw_triples(vec![("a", "r", "b")]);
        let sink = g.entity_id("b").unwrap();
        assert!(stub_candidate_generator("q", &g, &[sink], 1).is_empty());
    }
}
