//! Pointing the pipeline at a real HTTP text-generation endpoint. The API
//! key comes from the environment variable named in the settings — never
//! from code or flags. Without `KGPOISON_ENDPOINT` and the key set, this
//! example explains itself and exits cleanly.
//!
//! Run with:
//! ```text
//! KGPOISON_ENDPOINT=https://api.example.com/v1/completions \
//! KGPOISON_API_KEY=... cargo run --example remote_client
//! ```

use kgpoison::client::{ClientSettings, HttpTextGenClient};
use kgpoison::fixtures::{film_graph, film_question};
use kgpoison::kg::GraphView;
use kgpoison::sim::{plan_relation_paths_oracle, remote_generate, retrieve_by_paths};

fn main() -> kgpoison::Result<()> {
    let Ok(endpoint) = std::env::var("KGPOISON_ENDPOINT") else {
        println!("KGPOISON_ENDPOINT not set; nothing to call.");
        println!("Set KGPOISON_ENDPOINT and KGPOISON_API_KEY to run this example.");
        return Ok(());
    };
    let settings = ClientSettings {
        endpoint: Some(endpoint),
        audit_log: Some(std::env::temp_dir().join("kgpoison-remote-audit.jsonl")),
        ..ClientSettings::default()
    };
    // Fails fast (before any question) when the key variable is unset.
    let client = HttpTextGenClient::new(&settings)?;

    let graph = film_graph();
    let record = film_question();
    let topic = graph.entity_id(&record.q_entity[0]).unwrap();
    let gold = graph.entity_id(&record.a_entity[0]).unwrap();
    let plans = plan_relation_paths_oracle(&graph, &[topic], &[gold], 3)?;
    let evidence = retrieve_by_paths(&graph, &[topic], &plans, 10_000)?;

    let prediction = remote_generate(&graph, &record.question, &evidence, &client, 10)?;
    println!("question: {}", record.question);
    println!("remote answers: {:?}", prediction.answers);
    println!(
        "audit log: {}",
        settings.audit_log.as_ref().unwrap().display()
    );
    Ok(())
}
