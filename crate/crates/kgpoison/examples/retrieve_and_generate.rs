//! The simulated pipeline end to end on the worked example: plan, retrieve
//! with both retrievers, generate with the mock model, and detect how far
//! inserted triples propagated — clean versus poisoned.
//!
//! Run with: `cargo run --example retrieve_and_generate`

use kgpoison::adversary::{AdversarialTarget, AdversarialTargetSet};
use kgpoison::fixtures::{film_graph, film_question};
use kgpoison::kg::GraphView;
use kgpoison::poison::{apply_perturbations, craft_perturbations};
use kgpoison::sim::{
    detect_adversarial_evidence, mock_generate, plan_relation_paths_oracle, retrieve_by_paths,
    retrieve_subgraph_topk,
};

fn main() -> kgpoison::Result<()> {
    let graph = film_graph();
    let record = film_question();
    let topic = graph.entity_id(&record.q_entity[0]).unwrap();
    let gold = graph.entity_id(&record.a_entity[0]).unwrap();

    // Clean pass.
    let plans = plan_relation_paths_oracle(&graph, &[topic], &[gold], 3)?;
    let evidence = retrieve_by_paths(&graph, &[topic], &plans, 10_000)?;
    println!("clean evidence ({:?}):", evidence.kind);
    for line in evidence.lines(&graph) {
        println!("  {line}");
    }
    let answer = mock_generate(&graph, &evidence, 10);
    println!("clean answers: {:?}\n", answer.answers);

    // Poison toward UK, re-plan over the overlay, and run the same pipeline.
    let uk = graph.entity_id("UK").unwrap();
    let targets = AdversarialTargetSet {
        question_id: record.id.clone(),
        targets: vec![AdversarialTarget {
            entity: uk,
            raw_candidate: "UK".to_string(),
            similarity: 1.0,
        }],
        requested_n: 1,
    };
    let pset = craft_perturbations(&graph, &[topic], &targets, &plans, 4, 17)?;
    let poisoned = apply_perturbations(&graph, &pset)?;
    let plans = plan_relation_paths_oracle(&poisoned, &[topic], &[gold, uk], 3)?;
    let evidence = retrieve_by_paths(&poisoned, &[topic], &plans, 10_000)?;
    println!("poisoned evidence:");
    for line in evidence.lines(&poisoned) {
        println!("  {line}");
    }
    let answer = mock_generate(&poisoned, &evidence, 10);
    println!("poisoned answers: {:?}", answer.answers);

    let detection = detect_adversarial_evidence(&evidence, &pset);
    println!(
        "detection: retrieved={} full_chain={} matched_targets={:?}\n",
        detection.retrieved,
        detection.full_chain,
        detection
            .matched_targets
            .iter()
            .map(|e| graph.entity_label(*e))
            .collect::<Vec<_>>()
    );

    // The lexical subgraph retriever sees the same poisoned triple pool.
    let evidence = retrieve_subgraph_topk(&poisoned, &record.question, &[topic], 5);
    println!("subgraph top-5 on the poisoned graph:");
    for line in evidence.lines(&poisoned) {
        println!("  {line}");
    }
    Ok(())
}
