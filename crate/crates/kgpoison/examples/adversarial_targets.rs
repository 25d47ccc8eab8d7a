//! Turning raw candidate answers into adversarial targets: fuzzy alignment
//! onto graph entities, the similarity threshold, and topic exclusion.
//!
//! Run with: `cargo run --example adversarial_targets`

use kgpoison::adversary::{align_candidates_to_kg, stub_candidate_generator};
use kgpoison::fixtures::{film_graph, film_question};
use kgpoison::kg::GraphView;

fn main() {
    let graph = film_graph();
    let record = film_question();
    let topic = graph.entity_id(&record.q_entity[0]).unwrap();

    // Candidates as a model might produce them: typos, padding, topic
    // echoes, and strings that match nothing.
    let candidates: Vec<String> = [
        "Englund",               // one edit from an entity label
        "  cardiff ",            // survives normalization
        "Manchester by the Sea", // topic — excluded even at similarity 1.0
        "Mars",                  // no entity within the threshold
        "wales",
        "Cardiff", // duplicate entity — collapsed
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();

    let targets = align_candidates_to_kg(&record.id, &candidates, &graph, &[topic], 5, 0.8);
    println!("aligned targets (n requested = {}):", targets.requested_n);
    for t in &targets.targets {
        println!(
            "  {:?} -> {} (similarity {:.3})",
            t.raw_candidate,
            graph.entity_label(t.entity),
            t.similarity
        );
    }

    // Without a live model, the stub proposes answer-like entities from the
    // topic's two-hop neighborhood, in seeded order.
    let stub = stub_candidate_generator(&record.id, &graph, &[topic], 17);
    println!("stub candidates for {:?}: {stub:?}", record.question);
}
