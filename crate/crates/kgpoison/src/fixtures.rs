//! Shared hand-checkable fixtures used across unit tests, doc examples, and
//! the integration suite. Kept in the library (not `tests/`) so runnable
//! examples can use them too.

use crate::dataset::QuestionRecord;
use crate::kg::KnowledgeGraph;

/// Eight-entity film/geography graph exercising every tricky shape at once:
/// an ambiguous surface form ("Manchester"), a two-hop gold chain, and a
/// disconnected decoy region the attacker can redirect answers into.
///
/// ```text
/// manchester by the sea → filmed_in_city   → manchester ma
/// manchester ma         → city_in_country  → usa
/// manchester uk         → containedin      → england
/// england               → containedin      → uk
/// cardiff               → locatedin        → wales
/// wales                 → containedin      → uk
/// ```
pub fn film_graph() -> KnowledgeGraph {
    KnowledgeGraph::from_raw_triples(film_triples())
}

/// The raw label triples behind [`film_graph`].
pub fn film_triples() -> Vec<(&'static str, &'static str, &'static str)> {
    vec![
        ("Manchester by the Sea", "filmed_in_city", "Manchester MA"),
        ("Manchester MA", "city_in_country", "USA"),
        ("Manchester UK", "containedIn", "England"),
        ("England", "containedIn", "UK"),
        ("Cardiff", "locatedIn", "Wales"),
        ("Wales", "containedIn", "UK"),
    ]
}

/// The QA record built on [`film_graph`]: gold answer "usa", with "uk" as
/// the natural misleading target one edge rewrite away.
pub fn film_question() -> QuestionRecord {
    QuestionRecord {
        id: "film-0".to_string(),
        question: "which country is manchester by the sea filmed in".to_string(),
        q_entity: vec!["Manchester by the Sea".to_string()],
        a_entity: vec!["USA".to_string()],
        graph: film_triples()
            .into_iter()
            .map(|(h, r, t)| (h.to_string(), r.to_string(), t.to_string()))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::GraphView;

    #[test]
    fn fixture_shape_is_stable() {
        let g = film_graph();
        assert_eq!(
            (g.entity_count(), g.relation_count(), g.triple_count()),
            (8, 4, 6)
        );
        let q = film_question();
        assert_eq!(q.graph.len(), 6);
        assert!(g.entity_id(&q.q_entity[0]).is_some());
        assert!(g.entity_id(&q.a_entity[0]).is_some());
    }
}
