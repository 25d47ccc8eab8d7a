//! Interning label triples into a `KnowledgeGraph` and querying it, plus
//! the copy-free poisoning overlay.
//!
//! Run with: `cargo run --example build_graph`

use kgpoison::kg::{Direction, GraphView, KnowledgeGraph, Triple};

fn main() -> kgpoison::Result<()> {
    // Labels are normalized on interning (case and whitespace), so "USA"
    // and "usa" are the same entity.
    let graph = KnowledgeGraph::from_raw_triples(vec![
        ("Manchester by the Sea", "filmed_in_city", "Manchester MA"),
        ("Manchester MA", "city_in_country", "USA"),
        ("Manchester UK", "containedIn", "England"),
        ("England", "containedIn", "UK"),
    ]);
    println!(
        "graph: {} entities, {} relations, {} triples",
        graph.entity_count(),
        graph.relation_count(),
        graph.triple_count()
    );

    let film = graph.entity_id("Manchester by the Sea").unwrap();
    let contained_in = graph.relation_id("containedIn").unwrap();
    for (relation, neighbor) in graph.neighbors(film, Direction::Forward) {
        println!(
            "  {} --{}--> {}",
            graph.entity_label(film),
            graph.relation_label(relation),
            graph.entity_label(neighbor)
        );
    }

    // Everything incident to England, in either direction.
    let england = graph.entity_id("England").unwrap();
    let inward = graph.adjacency_query(england, Some(contained_in), Direction::Reverse)?;
    println!(
        "contained in England: {:?}",
        inward
            .iter()
            .map(|e| graph.entity_label(*e))
            .collect::<Vec<_>>()
    );

    // Insertion produces an overlay; the base graph is untouched.
    let manchester_ma = graph.entity_id("Manchester MA").unwrap();
    let uk = graph.entity_id("UK").unwrap();
    let poisoned = graph.insert_triples(&[Triple::new(manchester_ma, contained_in, uk)])?;
    println!(
        "overlay: {} triples (base still {})",
        poisoned.triple_count(),
        graph.triple_count()
    );
    for (relation, neighbor) in poisoned.neighbors(manchester_ma, Direction::Forward) {
        println!(
            "  {} --{}--> {}",
            poisoned.entity_label(manchester_ma),
            poisoned.relation_label(relation),
            poisoned.entity_label(neighbor)
        );
    }
    Ok(())
}
