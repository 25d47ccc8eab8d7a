//! Crafting a budgeted insertion attack on the worked example: the target
//! gets a grounded-prefix edge that redirects an existing inference chain,
//! and the overlay shows the chain now reaching the false answer.
//!
//! Run with: `cargo run --example craft_attack`

use kgpoison::adversary::{AdversarialTarget, AdversarialTargetSet};
use kgpoison::fixtures::{film_graph, film_question};
use kgpoison::grounding::terminal_entities;
use kgpoison::kg::GraphView;
use kgpoison::poison::{apply_perturbations, craft_perturbations, dump_perturbations};
use kgpoison::sim::plan_relation_paths_oracle;

fn main() -> kgpoison::Result<()> {
    let graph = film_graph();
    let record = film_question();
    let topic = graph.entity_id(&record.q_entity[0]).unwrap();
    let uk = graph.entity_id("UK").unwrap();

    // The attacker wants the pipeline to answer "UK".
    let targets = AdversarialTargetSet {
        question_id: record.id.clone(),
        targets: vec![AdversarialTarget {
            entity: uk,
            raw_candidate: "United Kingdom".to_string(),
            similarity: 1.0,
        }],
        requested_n: 1,
    };

    // Attack paths: the gold chain's shape, reused toward the target. The
    // film has no route to UK, so planning toward the gold answer's shape
    // is what a real attacker would imitate.
    let gold = graph.entity_id(&record.a_entity[0]).unwrap();
    let paths = plan_relation_paths_oracle(&graph, &[topic], &[gold], 3)?;
    println!(
        "attack paths: {:?}",
        paths.iter().map(|p| p.render(&graph)).collect::<Vec<_>>()
    );

    let pset = craft_perturbations(&graph, &[topic], &targets, &paths, 4, 17)?;
    let dump = dump_perturbations(&graph, &pset);
    println!("inserted {} triple(s):", dump.inserted_total);
    for entry in &dump.entries {
        for p in &entry.planted {
            println!(
                "  ({}, {}, {})  mode={:?}  via `{}`",
                p.head,
                p.relation,
                p.tail,
                p.mode,
                p.source_path.as_deref().unwrap_or("-")
            );
        }
    }

    // Over the poisoned overlay the same question pattern now reaches both
    // the real answer and the target.
    let poisoned = apply_perturbations(&graph, &pset)?;
    let terminals = terminal_entities(&poisoned, topic, &paths[0])?;
    println!(
        "terminals of `{}` after poisoning: {:?}",
        paths[0].render(&graph),
        terminals
            .iter()
            .map(|e| graph.entity_label(*e))
            .collect::<Vec<_>>()
    );
    Ok(())
}
