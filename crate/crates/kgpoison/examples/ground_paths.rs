//! Relation-path semantics on a small worked graph: grounding a pattern
//! into concrete reasoning paths, terminal sets, and shortest relation
//! paths between entities.
//!
//! Run with: `cargo run --example ground_paths`

use kgpoison::fixtures::film_graph;
use kgpoison::grounding::{
    enumerate_reasoning_paths, ground_relation_path, shortest_relation_paths, terminal_entities,
    RelationPath,
};
use kgpoison::kg::GraphView;

fn main() -> kgpoison::Result<()> {
    let graph = film_graph();
    let film = graph.entity_id("Manchester by the Sea").unwrap();
    let usa = graph.entity_id("USA").unwrap();
    let uk = graph.entity_id("UK").unwrap();

    // Instantiate the pattern filmed_in_city -> city_in_country from the
    // film: every concrete path, in deterministic order.
    let pattern = RelationPath::new(vec![
        graph.relation_id("filmed_in_city").unwrap(),
        graph.relation_id("city_in_country").unwrap(),
    ])?;
    let grounded = ground_relation_path(&graph, film, &pattern, 10_000)?;
    println!("groundings of `{}`:", pattern.render(&graph));
    for path in &grounded.paths {
        println!("  {}", path.render(&graph));
    }

    let terminals = terminal_entities(&graph, film, &pattern)?;
    println!(
        "terminals: {:?}",
        terminals
            .iter()
            .map(|e| graph.entity_label(*e))
            .collect::<Vec<_>>()
    );

    // Minimal-length relation sequences connecting two entities.
    for (label, dst) in [("USA", usa), ("UK", uk)] {
        let shortest = shortest_relation_paths(&graph, film, dst, 3)?;
        println!(
            "shortest film → {label}: {:?}",
            shortest
                .iter()
                .map(|p| p.render(&graph))
                .collect::<Vec<_>>()
        );
    }

    // Everything reachable in up to two hops, as full reasoning paths.
    let all = enumerate_reasoning_paths(&graph, film, 2, 10_000)?;
    println!("all paths from the film, up to two hops:");
    for path in &all.paths {
        println!("  {}", path.render(&graph));
    }
    Ok(())
}
