//! Full evaluation on the synthetic benchmark: a clean run, the targeted
//! insertion attack, and the random-corruption baseline at the same budget,
//! with aggregate metrics side by side and all artifacts written to disk.
//!
//! Run with: `cargo run --example run_experiment`

use std::fs;

use kgpoison::dataset::write_jsonl;
use kgpoison::harness::{cmd_evaluate, summarize_report, AttackMode, ExperimentConfig};
use kgpoison::synthetic::{generate_benchmark, SyntheticConfig};

fn main() -> kgpoison::Result<()> {
    let dir = std::env::temp_dir().join("kgpoison-example-experiment");
    fs::create_dir_all(&dir)?;

    // 50 questions, each answerable through a unique two-hop chain.
    let records = generate_benchmark(&SyntheticConfig::default());
    let dataset = dir.join("synthetic.jsonl");
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &records)?;
    fs::write(&dataset, buf)?;
    println!(
        "benchmark: {} questions at {}\n",
        records.len(),
        dataset.display()
    );

    for attack in [AttackMode::None, AttackMode::Ours, AttackMode::Random] {
        let mut config = ExperimentConfig::new(&dataset, dir.join(format!("run-{attack}")));
        config.attack = attack;
        let run = cmd_evaluate(&config)?;
        println!("=== attack = {attack} ===");
        print!("{}", summarize_report(&run.report));
        println!("artifacts: {}\n", config.output_dir.display());
    }
    Ok(())
}
