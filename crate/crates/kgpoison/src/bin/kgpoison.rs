//! Command-line front end: `attack` crafts and dumps perturbations,
//! `evaluate` runs the full clean/attacked pipeline, `report` recomputes
//! aggregates from per-question dumps. Flags mirror the library's
//! `ExperimentConfig`; a `--config` JSON file overrides flags. The API key
//! is only ever read from the environment variable named by
//! `--api-key-env` (default `KGPOISON_API_KEY`), never from a flag.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kgpoison::harness::{
    cmd_attack, cmd_evaluate, cmd_report, summarize_report, AttackMode, ConfigPatch,
    ExperimentConfig, GeneratorKind, RetrieverKind,
};

#[derive(Parser)]
#[command(
    name = "kgpoison",
    version,
    about = "Knowledge-graph poisoning testbed for KG-backed retrieval-augmented QA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Craft insertions and write the poisoned dataset + perturbation dump.
    Attack(RunArgs),
    /// Run the clean (and, with --attack, the attacked) evaluation pipeline.
    Evaluate(RunArgs),
    /// Recompute the aggregate report from a run directory's per-question rows.
    Report {
        /// Run directory containing per_question.jsonl.
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AttackArg {
    None,
    Ours,
    Random,
}

impl From<AttackArg> for AttackMode {
    fn from(a: AttackArg) -> Self {
        match a {
            AttackArg::None => AttackMode::None,
            AttackArg::Ours => AttackMode::Ours,
            AttackArg::Random => AttackMode::Random,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RetrieverArg {
    Paths,
    Subgraph,
}

impl From<RetrieverArg> for RetrieverKind {
    fn from(r: RetrieverArg) -> Self {
        match r {
            RetrieverArg::Paths => RetrieverKind::Paths,
            RetrieverArg::Subgraph => RetrieverKind::Subgraph,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GeneratorArg {
    Mock,
    Remote,
}

impl From<GeneratorArg> for GeneratorKind {
    fn from(g: GeneratorArg) -> Self {
        match g {
            GeneratorArg::Mock => GeneratorKind::Mock,
            GeneratorArg::Remote => GeneratorKind::Remote,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSONL dataset of question records.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Output directory for reports and dumps.
    #[arg(long, default_value = "kgpoison-out")]
    out: PathBuf,
    /// JSON configuration file; present fields override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Perturbation strategy (attack defaults to `ours`, evaluate to `none`).
    #[arg(long, value_enum)]
    attack: Option<AttackArg>,
    /// Adversarial targets per question (N).
    #[arg(long)]
    n_targets: Option<usize>,
    /// Insertion budget per target (K); the random baseline uses N*K total.
    #[arg(long)]
    budget_k: Option<usize>,
    /// Planning horizon in hops (1..=4).
    #[arg(long)]
    max_hops: Option<usize>,
    #[arg(long, value_enum)]
    retriever: Option<RetrieverArg>,
    /// k for the subgraph retriever.
    #[arg(long)]
    subgraph_top_k: Option<usize>,
    #[arg(long, value_enum)]
    generator: Option<GeneratorArg>,
    /// Candidate-to-entity alignment threshold in [0, 1].
    #[arg(long)]
    similarity_threshold: Option<f64>,
    /// Candidate generation rounds for the remote attacker.
    #[arg(long)]
    candidate_rounds: Option<u32>,
    /// Answers kept per prediction.
    #[arg(long)]
    max_answers: Option<usize>,
    /// Grounding expansion cap for planner and path retriever.
    #[arg(long)]
    grounding_cap: Option<usize>,
    /// Retrieve with the clean run's plans instead of re-planning.
    #[arg(long)]
    reuse_clean_plans: bool,
    /// Count a question as attacked-retrieved only on a full chain.
    #[arg(long)]
    strict_chain_detection: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// HTTP endpoint for the remote generator.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name sent to the remote endpoint.
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    api_key_env: Option<String>,
    /// JSONL audit log of remote requests and responses.
    #[arg(long)]
    audit_log: Option<PathBuf>,
    /// Maximum concurrent remote requests.
    #[arg(long)]
    max_in_flight: Option<usize>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    timeout_secs: Option<u64>,
}

impl RunArgs {
    fn into_config(self, default_attack: AttackMode) -> anyhow::Result<ExperimentConfig> {
        let mut config =
            ExperimentConfig::new(self.dataset.clone().unwrap_or_default(), self.out.clone());
        config.attack = default_attack;

        if let Some(v) = self.attack {
            config.attack = v.into();
        }
        if let Some(v) = self.n_targets {
            config.n_targets = v;
        }
        if let Some(v) = self.budget_k {
            config.budget_k = v;
        }
        if let Some(v) = self.max_hops {
            config.max_hops = v;
        }
        if let Some(v) = self.retriever {
            config.retriever = v.into();
        }
        if let Some(v) = self.subgraph_top_k {
            config.subgraph_top_k = v;
        }
        if let Some(v) = self.generator {
            config.generator = v.into();
        }
        if let Some(v) = self.similarity_threshold {
            config.similarity_threshold = v;
        }
        if let Some(v) = self.candidate_rounds {
            config.candidate_rounds = v;
        }
        if let Some(v) = self.max_answers {
            config.max_answers = v;
        }
        if let Some(v) = self.grounding_cap {
            config.grounding_cap = v;
        }
        if self.reuse_clean_plans {
            config.reuse_clean_plans = true;
        }
        if self.strict_chain_detection {
            config.strict_chain_detection = true;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.endpoint {
            config.client.endpoint = Some(v);
        }
        if let Some(v) = self.model {
            config.client.model = v;
        }
        if let Some(v) = self.api_key_env {
            config.client.api_key_env = v;
        }
        if let Some(v) = self.audit_log {
            config.client.audit_log = Some(v);
        }
        if let Some(v) = self.max_in_flight {
            config.client.max_in_flight = v;
        }
        if let Some(v) = self.timeout_secs {
            config.client.timeout_secs = v;
        }

        if let Some(path) = &self.config {
            let patch = ConfigPatch::from_file(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            patch.apply(&mut config);
        }
        if config.dataset_path.as_os_str().is_empty() {
            bail!("no dataset: pass --dataset or set dataset_path in the config file");
        }
        Ok(config)
    }
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Attack(args) => {
            let config = args.into_config(AttackMode::Ours)?;
            let run = cmd_attack(&config)?;
            println!(
                "crafted perturbations for {} of {} questions ({} rejected)",
                run.poisoned.len(),
                run.manifest.counts.loaded,
                run.rejected.len()
            );
            println!("wrote {}", config.output_dir.display());
        }
        Command::Evaluate(args) => {
            let config = args.into_config(AttackMode::None)?;
            let run = cmd_evaluate(&config)?;
            print!("{}", summarize_report(&run.report));
            println!("wrote {}", config.output_dir.display());
        }
        Command::Report { dir } => {
            let report = cmd_report(&dir)?;
            print!("{}", summarize_report(&report));
            println!("rewrote {}", dir.join("report.json").display());
        }
    }
    Ok(())
}
