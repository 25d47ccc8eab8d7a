//! Experiment orchestration: configuration, clean/attacked runs, and report
//! emission.
//!
//! [`run_experiment`] drives the full pipeline for every question in a JSONL
//! dataset — plan, retrieve, generate, score; then (if an attack is
//! configured) build the target set, craft insertions, overlay them, re-run
//! the pipeline over the poisoned graph, and score again with the
//! manipulation metrics. [`write_report`] serializes everything a run
//! produced into a directory of machine-readable artifacts.
//!
//! Determinism contract: with the mock generator, `(config, seed, dataset)`
//! fully determine every output byte. Questions are processed by a worker
//! pool but carry their own RNG streams keyed by `(seed, question_id)`, and
//! results are merged in question-id order, so thread scheduling can never
//! leak into the artifacts.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    align_candidates_to_kg, generate_candidate_answers, stub_candidate_generator,
    AdversarialTargetSet,
};
use crate::client::{ClientSettings, HttpTextGenClient, TextGenClient};
use crate::dataset::{
    bind_question, file_sha256, load_jsonl, BoundQuestion, PoisonedRecord, RejectedRecord,
};
use crate::error::{Error, Result};
use crate::grounding::RelationPath;
use crate::kg::{EntityId, GraphView};
use crate::metrics::{
    adversarial_metrics, build_report, qa_metrics, AttackedRow, MetricsReport, QuestionOutcome,
    QuestionRow, RunCounts,
};
use crate::poison::{
    apply_perturbations, craft_perturbations, dump_perturbations, random_corruption_baseline,
    PerturbationMode, PerturbationSet, PerturbationSetDump,
};
use crate::sim::{
    detect_adversarial_evidence, mock_generate, plan_relation_paths_oracle, remote_generate,
    retrieve_by_paths, retrieve_subgraph_topk, EvidenceSet, Prediction, PROMPT_TEMPLATE_VERSION,
};
use crate::text::normalize;

/// Which perturbation strategy the attacked run uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    /// Clean evaluation only.
    #[default]
    None,
    /// Grounded-prefix insertion with fallback bridges.
    Ours,
    /// Endpoint-corruption baseline at the matched budget N·K.
    Random,
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackMode::None => "none",
            AttackMode::Ours => "ours",
            AttackMode::Random => "random",
        })
    }
}

/// Which retriever the simulated pipeline uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrieverKind {
    /// Ground planned relation paths from the topic entities.
    #[default]
    Paths,
    /// Score every triple and keep the top k.
    Subgraph,
}

impl fmt::Display for RetrieverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RetrieverKind::Paths => "paths",
            RetrieverKind::Subgraph => "subgraph",
        })
    }
}

/// Which answer generator the simulated pipeline uses. The choice also
/// selects the attacker's candidate source: `mock` pairs with the
/// deterministic stub candidate generator, `remote` asks the configured
/// HTTP endpoint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    #[default]
    Mock,
    Remote,
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorKind::Mock => "mock",
            GeneratorKind::Remote => "remote",
        })
    }
}

/// Everything a run needs. Field defaults follow the evaluation protocol:
/// five targets, budget four per target, three-hop planning.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub dataset_path: PathBuf,
    pub output_dir: PathBuf,
    pub attack: AttackMode,
    /// N — adversarial targets per question.
    pub n_targets: usize,
    /// K — insertion budget per target. The random baseline uses N·K total.
    pub budget_k: usize,
    /// Planning horizon; also bounds attack-path length.
    pub max_hops: usize,
    pub retriever: RetrieverKind,
    /// k for the subgraph retriever.
    pub subgraph_top_k: usize,
    pub generator: GeneratorKind,
    /// Candidate-to-entity alignment threshold.
    pub similarity_threshold: f64,
    /// Generation rounds when candidates come from the remote model.
    pub candidate_rounds: u32,
    /// Answers kept per prediction.
    pub max_answers: usize,
    /// Grounding expansion cap shared by planner and path retriever.
    pub grounding_cap: usize,
    /// Retrieve over the poisoned graph with the clean run's plans instead
    /// of re-planning. Reports name the mode used.
    pub reuse_clean_plans: bool,
    /// Count a question as attacked-retrieved only when a complete attack
    /// chain is in evidence, not any single inserted triple.
    pub strict_chain_detection: bool,
    pub seed: u64,
    pub client: ClientSettings,
}

impl ExperimentConfig {
    pub fn new(dataset_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            dataset_path: dataset_path.into(),
            output_dir: output_dir.into(),
            attack: AttackMode::None,
            n_targets: 5,
            budget_k: 4,
            max_hops: 3,
            retriever: RetrieverKind::Paths,
            subgraph_top_k: 100,
            generator: GeneratorKind::Mock,
            similarity_threshold: 0.8,
            candidate_rounds: 3,
            max_answers: 10,
            grounding_cap: 10_000,
            reuse_clean_plans: false,
            strict_chain_detection: false,
            seed: 17,
            client: ClientSettings::default(),
        }
    }

    /// Reject impossible settings before any work happens.
    pub fn validate(&self) -> Result<()> {
        if self.n_targets == 0 {
            return Err(Error::InvalidConfig("n_targets must be at least 1".into()));
        }
        if self.budget_k == 0 {
            return Err(Error::InvalidConfig("budget_k must be at least 1".into()));
        }
        if !(1..=4).contains(&self.max_hops) {
            return Err(Error::InvalidConfig(format!(
                "max_hops must be in 1..=4, got {}",
                self.max_hops
            )));
        }
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return Err(Error::InvalidConfig(format!(
                "similarity_threshold must be in [0, 1], got {}",
                self.similarity_threshold
            )));
        }
        if self.candidate_rounds == 0 {
            return Err(Error::InvalidConfig(
                "candidate_rounds must be at least 1".into(),
            ));
        }
        if self.subgraph_top_k == 0 {
            return Err(Error::InvalidConfig(
                "subgraph_top_k must be at least 1".into(),
            ));
        }
        if self.max_answers == 0 {
            return Err(Error::InvalidConfig(
                "max_answers must be at least 1".into(),
            ));
        }
        if self.grounding_cap == 0 {
            return Err(Error::InvalidConfig(
                "grounding_cap must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn needs_client(&self) -> bool {
        self.generator == GeneratorKind::Remote
    }

    fn planning_mode(&self) -> &'static str {
        if self.reuse_clean_plans {
            "reuse_clean_plans"
        } else {
            "replan_poisoned"
        }
    }
}

/// Partial configuration loaded from a JSON file; present fields override
/// whatever the flags built. Unknown keys are rejected so typos fail loudly
/// instead of silently keeping a default.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigPatch {
    pub dataset_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub attack: Option<AttackMode>,
    pub n_targets: Option<usize>,
    pub budget_k: Option<usize>,
    pub max_hops: Option<usize>,
    pub retriever: Option<RetrieverKind>,
    pub subgraph_top_k: Option<usize>,
    pub generator: Option<GeneratorKind>,
    pub similarity_threshold: Option<f64>,
    pub candidate_rounds: Option<u32>,
    pub max_answers: Option<usize>,
    pub grounding_cap: Option<usize>,
    pub reuse_clean_plans: Option<bool>,
    pub strict_chain_detection: Option<bool>,
    pub seed: Option<u64>,
    /// Replaces the whole client block when present.
    pub client: Option<ClientSettings>,
}

impl ConfigPatch {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let patch = serde_json::from_str(&text)?;
        Ok(patch)
    }

    pub fn apply(self, config: &mut ExperimentConfig) {
        macro_rules! take {
            ($($field:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        take!(
            dataset_path,
            output_dir,
            attack,
            n_targets,
            budget_k,
            max_hops,
            retriever,
            subgraph_top_k,
            generator,
            similarity_threshold,
            candidate_rounds,
            max_answers,
            grounding_cap,
            reuse_clean_plans,
            strict_chain_detection,
            seed,
            client,
        );
    }
}

/// One aligned target as written to the artifact dump.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TargetDump {
    pub label: String,
    pub raw_candidate: String,
    pub similarity: f64,
}

/// Attacked-side trace for one question.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttackedArtifact {
    pub targets: Vec<TargetDump>,
    /// Relation paths the attacker grounded against (rendered).
    pub attack_paths: Vec<String>,
    /// Retrieved evidence over the poisoned graph (rendered).
    pub evidence: Vec<String>,
    pub evidence_truncated: bool,
    pub answers: Vec<String>,
    pub retrieved: bool,
    pub full_chain_retrieved: bool,
    pub matched_targets: Vec<String>,
}

/// Full per-question trace: enough to audit a run without re-executing it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuestionArtifact {
    pub question_id: String,
    pub question: String,
    pub gold: Vec<String>,
    pub clean_evidence: Vec<String>,
    pub clean_evidence_truncated: bool,
    pub clean_answers: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attacked: Option<AttackedArtifact>,
}

/// Reproducibility fingerprint written next to every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub prompt_template_version: String,
    pub dataset_sha256: String,
    /// How attacked-run plans were obtained.
    pub planning: String,
    pub counts: RunCounts,
    /// Config echo. Client settings name the API-key environment variable,
    /// never its value.
    pub config: ExperimentConfig,
}

/// Everything one evaluation run produced.
#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub report: MetricsReport,
    pub artifacts: Vec<QuestionArtifact>,
    pub perturbations: Vec<PerturbationSetDump>,
    pub manifest: RunManifest,
}

struct QuestionResult {
    row: QuestionRow,
    artifact: QuestionArtifact,
    perturbations: Option<PerturbationSetDump>,
}

fn retrieve(
    config: &ExperimentConfig,
    graph: &impl GraphView,
    question: &str,
    topics: &[EntityId],
    paths: &[RelationPath],
) -> Result<EvidenceSet> {
    match config.retriever {
        RetrieverKind::Paths => retrieve_by_paths(graph, topics, paths, config.grounding_cap),
        RetrieverKind::Subgraph => Ok(retrieve_subgraph_topk(
            graph,
            question,
            topics,
            config.subgraph_top_k,
        )),
    }
}

fn generate(
    config: &ExperimentConfig,
    client: Option<&dyn TextGenClient>,
    graph: &impl GraphView,
    question: &str,
    evidence: &EvidenceSet,
) -> Result<Prediction> {
    match config.generator {
        GeneratorKind::Mock => Ok(mock_generate(graph, evidence, config.max_answers)),
        GeneratorKind::Remote => {
            let client = client.expect("remote generator requires a client (validated)");
            remote_generate(graph, question, evidence, client, config.max_answers)
        }
    }
}

/// Build the target set and perturbations for one bound question. Questions
/// where the attacker finds no usable target or no groundable path yield an
/// empty perturbation set: the attack simply did not happen there, and the
/// question still counts in every denominator.
fn build_perturbations(
    config: &ExperimentConfig,
    client: Option<&dyn TextGenClient>,
    bound: &BoundQuestion,
) -> Result<(PerturbationSet, AdversarialTargetSet, Vec<RelationPath>)> {
    let record = &bound.record;
    let empty_targets = AdversarialTargetSet {
        question_id: record.id.clone(),
        targets: Vec::new(),
        requested_n: config.n_targets,
    };
    match config.attack {
        AttackMode::None => Ok((
            PerturbationSet::empty(&record.id, config.budget_k),
            empty_targets,
            Vec::new(),
        )),
        AttackMode::Ours => {
            let candidates = match config.generator {
                GeneratorKind::Mock => {
                    stub_candidate_generator(&record.id, &bound.graph, &bound.topics, config.seed)
                }
                GeneratorKind::Remote => {
                    let client = client.expect("remote generator requires a client (validated)");
                    generate_candidate_answers(
                        &record.question,
                        client,
                        config.candidate_rounds,
                        config.client.completions_per_round,
                    )?
                }
            };
            let targets = align_candidates_to_kg(
                &record.id,
                &candidates,
                &bound.graph,
                &bound.topics,
                config.n_targets,
                config.similarity_threshold,
            );
            if targets.is_empty() {
                return Ok((
                    PerturbationSet::empty(&record.id, config.budget_k),
                    targets,
                    Vec::new(),
                ));
            }
            let paths = plan_relation_paths_oracle(
                &bound.graph,
                &bound.topics,
                &targets.entities(),
                config.max_hops,
            )?;
            if paths.is_empty() {
                return Ok((
                    PerturbationSet::empty(&record.id, config.budget_k),
                    targets,
                    paths,
                ));
            }
            let pset = craft_perturbations(
                &bound.graph,
                &bound.topics,
                &targets,
                &paths,
                config.budget_k,
                config.seed,
            )?;
            Ok((pset, targets, paths))
        }
        AttackMode::Random => {
            let count = config.n_targets * config.budget_k;
            let pset = random_corruption_baseline(
                &bound.graph,
                &record.id,
                &bound.topics,
                count,
                config.seed,
            )?;
            Ok((pset, empty_targets, Vec::new()))
        }
    }
}

/// Count distinct inserted triples attributed to one perturbation mode.
fn inserted_by_mode(pset: &PerturbationSet, mode: PerturbationMode) -> usize {
    let triples: BTreeSet<_> = pset
        .entries
        .iter()
        .flat_map(|e| e.planted.iter())
        .filter(|p| p.mode == mode)
        .map(|p| p.triple)
        .collect();
    triples.len()
}

/// Run the full clean (and, if configured, attacked) pipeline for one
/// question.
fn evaluate_question(
    config: &ExperimentConfig,
    client: Option<&dyn TextGenClient>,
    bound: &BoundQuestion,
) -> Result<QuestionResult> {
    let record = &bound.record;
    let graph = &bound.graph;
    let topics = &bound.topics;

    let gold_norm: BTreeSet<String> = record.a_entity.iter().map(|a| normalize(a)).collect();
    let gold_ids: Vec<EntityId> = {
        let set: BTreeSet<EntityId> = record
            .a_entity
            .iter()
            .filter_map(|a| graph.entity_id(a))
            .collect();
        set.into_iter().collect()
    };

    // Clean pass: plan toward the gold answers, retrieve, generate, score.
    let clean_paths = plan_relation_paths_oracle(graph, topics, &gold_ids, config.max_hops)?;
    let clean_evidence = retrieve(config, graph, &record.question, topics, &clean_paths)?;
    let clean_prediction = generate(config, client, graph, &record.question, &clean_evidence)?;
    let clean_outcome = QuestionOutcome {
        question_id: record.id.clone(),
        prediction: clean_prediction.clone(),
        gold: gold_norm.clone(),
        targets: BTreeSet::new(),
        adversarial_retrieved: false,
    };
    let clean_qa = qa_metrics(&clean_outcome);

    let mut attacked_row = None;
    let mut attacked_artifact = None;
    let mut perturbation_dump = None;

    if config.attack != AttackMode::None {
        let (pset, targets, attack_paths) = build_perturbations(config, client, bound)?;
        let poisoned = apply_perturbations(graph, &pset)?;

        // The deployed pipeline plans over whatever graph it is given. The
        // planning oracle needs beacons; gold plus the attacker's targets
        // stands in for a planner that explores every answer-like entity.
        let attacked_paths = if config.reuse_clean_plans {
            clean_paths.clone()
        } else {
            let mut beacons = gold_ids.clone();
            for e in targets.entities() {
                if !beacons.contains(&e) {
                    beacons.push(e);
                }
            }
            plan_relation_paths_oracle(&poisoned, topics, &beacons, config.max_hops)?
        };
        let evidence = retrieve(config, &poisoned, &record.question, topics, &attacked_paths)?;
        let prediction = generate(config, client, &poisoned, &record.question, &evidence)?;
        let detection = detect_adversarial_evidence(&evidence, &pset);
        let retrieved = if config.strict_chain_detection {
            detection.full_chain
        } else {
            detection.retrieved
        };

        let target_labels: BTreeSet<String> = targets
            .labels(graph)
            .iter()
            .map(|l| l.to_string())
            .collect();
        let outcome = QuestionOutcome {
            question_id: record.id.clone(),
            prediction: prediction.clone(),
            gold: gold_norm.clone(),
            targets: target_labels.clone(),
            adversarial_retrieved: retrieved,
        };
        attacked_row = Some(AttackedRow {
            answers: prediction.answers.clone(),
            qa: qa_metrics(&outcome),
            adversarial: adversarial_metrics(&outcome),
            targets: target_labels.into_iter().collect(),
            inserted: pset.total_inserted(),
            grounded_prefix_inserted: inserted_by_mode(&pset, PerturbationMode::GroundedPrefix),
            fallback_inserted: inserted_by_mode(&pset, PerturbationMode::FallbackBridge),
            random_inserted: inserted_by_mode(&pset, PerturbationMode::RandomCorruption),
            retrieved,
            full_chain_retrieved: detection.full_chain,
            generated: outcome.adversarial_generated(),
        });
        attacked_artifact = Some(AttackedArtifact {
            targets: targets
                .targets
                .iter()
                .map(|t| TargetDump {
                    label: graph.entity_label(t.entity).to_string(),
                    raw_candidate: t.raw_candidate.clone(),
                    similarity: t.similarity,
                })
                .collect(),
            attack_paths: attack_paths.iter().map(|p| p.render(graph)).collect(),
            evidence: evidence.lines(&poisoned),
            evidence_truncated: evidence.truncated,
            answers: prediction.answers,
            retrieved,
            full_chain_retrieved: detection.full_chain,
            matched_targets: detection
                .matched_targets
                .iter()
                .map(|&e| graph.entity_label(e).to_string())
                .collect(),
        });
        perturbation_dump = Some(dump_perturbations(graph, &pset));
    }

    let row = QuestionRow {
        question_id: record.id.clone(),
        question: record.question.clone(),
        gold: gold_norm.iter().cloned().collect(),
        clean_answers: clean_prediction.answers.clone(),
        clean: clean_qa,
        attacked: attacked_row,
    };
    let artifact = QuestionArtifact {
        question_id: record.id.clone(),
        question: record.question.clone(),
        gold: gold_norm.into_iter().collect(),
        clean_evidence: clean_evidence.lines(graph),
        clean_evidence_truncated: clean_evidence.truncated,
        clean_answers: clean_prediction.answers,
        attacked: attacked_artifact,
    };
    Ok(QuestionResult {
        row,
        artifact,
        perturbations: perturbation_dump,
    })
}

fn build_client(config: &ExperimentConfig) -> Result<Option<Arc<HttpTextGenClient>>> {
    if config.needs_client() {
        Ok(Some(Arc::new(HttpTextGenClient::new(&config.client)?)))
    } else {
        Ok(None)
    }
}

/// Evaluate every question in the configured dataset. Per-question failures
/// land in the rejection list and never abort the run; configuration and
/// dataset-level failures abort before any question is evaluated.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun> {
    config.validate()?;
    let client = build_client(config)?;
    let client_ref: Option<&dyn TextGenClient> = client.as_deref().map(|c| c as &dyn TextGenClient);
    let dataset = load_jsonl(&config.dataset_path)?;
    let dataset_sha256 = file_sha256(&config.dataset_path)?;
    let loaded = dataset.loaded();
    let mut rejected = dataset.rejected.clone();

    let outcomes: Vec<std::result::Result<QuestionResult, RejectedRecord>> = dataset
        .records
        .into_par_iter()
        .map(|record| {
            let id = record.id.clone();
            bind_question(record)
                .and_then(|bound| evaluate_question(config, client_ref, &bound))
                .map_err(|e| RejectedRecord {
                    id,
                    line: 0,
                    reason: e.to_string(),
                })
        })
        .collect();

    let mut rows = Vec::new();
    let mut artifacts = Vec::new();
    let mut perturbations = Vec::new();
    let mut runtime_rejected = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(result) => {
                rows.push(result.row);
                artifacts.push(result.artifact);
                perturbations.extend(result.perturbations);
            }
            Err(rejection) => runtime_rejected.push(rejection),
        }
    }
    runtime_rejected.sort_by(|a, b| a.id.cmp(&b.id));
    rejected.extend(runtime_rejected);
    artifacts.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    perturbations.sort_by(|a, b| a.question_id.cmp(&b.question_id));

    let report = build_report(rows, rejected, loaded);
    let manifest = RunManifest {
        command: "evaluate".to_string(),
        prompt_template_version: PROMPT_TEMPLATE_VERSION.trim().to_string(),
        dataset_sha256,
        planning: config.planning_mode().to_string(),
        counts: report.counts,
        config: config.clone(),
    };
    Ok(ExperimentRun {
        report,
        artifacts,
        perturbations,
        manifest,
    })
}

fn write_json_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.push(b'\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_pretty_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn tsv_f(x: f64) -> String {
    format!("{x:.6}")
}

/// Write every artifact of a run into `dir`: the aggregate report, the
/// per-question table (TSV, `NA` for undefined cells), per-question JSONL
/// rows, evidence/answer traces, the perturbation dump, and the manifest.
/// Byte-stable for identical runs with the mock generator.
pub fn write_report(run: &ExperimentRun, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let report_path = dir.join("report.json");
    write_pretty_json(&report_path, &run.report)?;
    written.push(report_path);

    let tsv_path = dir.join("per_question.tsv");
    let mut tsv = String::new();
    tsv.push_str(concat!(
        "question_id\thit\tprecision\trecall\tf1\thits_at_1\tem",
        "\tatk_hit\tatk_precision\tatk_recall\tatk_f1\tatk_hits_at_1\tatk_em",
        "\ta_precision\ta_h1\ta_mrr\ttargets\tinserted",
        "\tadversarial_retrieved\tfull_chain_retrieved\tadversarial_generated\n",
    ));
    for row in &run.report.per_question {
        let c = &row.clean;
        tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            row.question_id,
            tsv_f(c.hit),
            tsv_f(c.precision),
            tsv_f(c.recall),
            tsv_f(c.f1),
            tsv_f(c.hits_at_1),
            tsv_f(c.em)
        ));
        match &row.attacked {
            Some(a) => {
                tsv.push_str(&format!(
                    "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    tsv_f(a.qa.hit),
                    tsv_f(a.qa.precision),
                    tsv_f(a.qa.recall),
                    tsv_f(a.qa.f1),
                    tsv_f(a.qa.hits_at_1),
                    tsv_f(a.qa.em),
                    tsv_f(a.adversarial.a_precision),
                    tsv_f(a.adversarial.a_h1),
                    tsv_f(a.adversarial.a_mrr),
                    a.targets.len(),
                    a.inserted,
                    a.retrieved,
                    a.full_chain_retrieved,
                    a.generated
                ));
            }
            None => {
                tsv.push_str(&"\tNA".repeat(14));
                tsv.push('\n');
            }
        }
    }
    fs::write(&tsv_path, tsv)?;
    written.push(tsv_path);

    let rows_path = dir.join("per_question.jsonl");
    write_json_lines(&rows_path, &run.report.per_question)?;
    written.push(rows_path);

    let artifacts_path = dir.join("artifacts.jsonl");
    write_json_lines(&artifacts_path, &run.artifacts)?;
    written.push(artifacts_path);

    let perturbations_path = dir.join("perturbations.jsonl");
    write_json_lines(&perturbations_path, &run.perturbations)?;
    written.push(perturbations_path);

    let manifest_path = dir.join("manifest.json");
    write_pretty_json(&manifest_path, &run.manifest)?;
    written.push(manifest_path);

    Ok(written)
}

/// `evaluate` entry point: run and write everything to the configured
/// output directory.
pub fn cmd_evaluate(config: &ExperimentConfig) -> Result<ExperimentRun> {
    let run = run_experiment(config)?;
    write_report(&run, &config.output_dir)?;
    Ok(run)
}

/// Output of the craft-only `attack` command.
#[derive(Clone, Debug)]
pub struct AttackRun {
    pub poisoned: Vec<PoisonedRecord>,
    pub perturbations: Vec<PerturbationSetDump>,
    pub rejected: Vec<RejectedRecord>,
    pub manifest: RunManifest,
}

/// `attack` entry point: craft and dump perturbations without evaluating.
/// Writes `poisoned.jsonl` (records with the merged graph plus an
/// `inserted_triples` sidecar field), `perturbations.jsonl`, and
/// `manifest.json`.
pub fn cmd_attack(config: &ExperimentConfig) -> Result<AttackRun> {
    config.validate()?;
    if config.attack == AttackMode::None {
        return Err(Error::InvalidConfig(
            "attack mode `none` plants nothing; choose `ours` or `random`".into(),
        ));
    }
    let client = build_client(config)?;
    let client_ref: Option<&dyn TextGenClient> = client.as_deref().map(|c| c as &dyn TextGenClient);
    let dataset = load_jsonl(&config.dataset_path)?;
    let dataset_sha256 = file_sha256(&config.dataset_path)?;
    let loaded = dataset.loaded();
    let mut rejected = dataset.rejected.clone();

    let outcomes: Vec<std::result::Result<(PoisonedRecord, PerturbationSetDump), RejectedRecord>> =
        dataset
            .records
            .into_par_iter()
            .map(|record| {
                let id = record.id.clone();
                bind_question(record)
                    .and_then(|bound| {
                        let (pset, _, _) = build_perturbations(config, client_ref, &bound)?;
                        let dump = dump_perturbations(&bound.graph, &pset);
                        let mut record = bound.record;
                        let inserted: Vec<(String, String, String)> = dump
                            .entries
                            .iter()
                            .flat_map(|e| e.planted.iter())
                            .map(|p| (p.head.clone(), p.relation.clone(), p.tail.clone()))
                            .collect::<BTreeSet<_>>()
                            .into_iter()
                            .collect();
                        record.graph.extend(inserted.iter().cloned());
                        Ok((
                            PoisonedRecord {
                                record,
                                inserted_triples: inserted,
                            },
                            dump,
                        ))
                    })
                    .map_err(|e| RejectedRecord {
                        id,
                        line: 0,
                        reason: e.to_string(),
                    })
            })
            .collect();

    let mut poisoned = Vec::new();
    let mut perturbations = Vec::new();
    let mut runtime_rejected = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok((record, dump)) => {
                poisoned.push(record);
                perturbations.push(dump);
            }
            Err(rejection) => runtime_rejected.push(rejection),
        }
    }
    runtime_rejected.sort_by(|a, b| a.id.cmp(&b.id));
    rejected.extend(runtime_rejected);
    poisoned.sort_by(|a, b| a.record.id.cmp(&b.record.id));
    perturbations.sort_by(|a, b| a.question_id.cmp(&b.question_id));

    let manifest = RunManifest {
        command: "attack".to_string(),
        prompt_template_version: PROMPT_TEMPLATE_VERSION.trim().to_string(),
        dataset_sha256,
        planning: config.planning_mode().to_string(),
        counts: RunCounts {
            loaded,
            evaluated: poisoned.len(),
            rejected: rejected.len(),
        },
        config: config.clone(),
    };

    fs::create_dir_all(&config.output_dir)?;
    write_json_lines(&config.output_dir.join("poisoned.jsonl"), &poisoned)?;
    write_json_lines(
        &config.output_dir.join("perturbations.jsonl"),
        &perturbations,
    )?;
    write_pretty_json(&config.output_dir.join("manifest.json"), &manifest)?;

    Ok(AttackRun {
        poisoned,
        perturbations,
        rejected,
        manifest,
    })
}

/// `report` entry point: rebuild the aggregate report from the per-question
/// dump in `dir`, rewrite `report.json`, and return it. Counts and the
/// rejection list are carried over from the existing report when present.
pub fn cmd_report(dir: &Path) -> Result<MetricsReport> {
    let rows_path = dir.join("per_question.jsonl");
    let text = fs::read_to_string(&rows_path)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: QuestionRow = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            line: idx + 1,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    let (rejected, loaded) = match fs::read_to_string(dir.join("report.json")) {
        Ok(text) => {
            let previous: MetricsReport = serde_json::from_str(&text)?;
            (previous.rejected, previous.counts.loaded)
        }
        Err(_) => (Vec::new(), rows.len()),
    };
    let report = build_report(rows, rejected, loaded);
    write_pretty_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

/// One-paragraph human summary of a run, for CLI output.
pub fn summarize_report(report: &MetricsReport) -> String {
    let mut out = String::new();
    let c = &report.counts;
    let _ = writeln!(
        out,
        "questions: {} loaded, {} evaluated, {} rejected",
        c.loaded, c.evaluated, c.rejected
    );
    if let Some(clean) = &report.clean {
        let _ = writeln!(
            out,
            "clean    (n={}): hit {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  hits@1 {:.4}  em {:.4}",
            clean.denominator,
            clean.hit,
            clean.precision,
            clean.recall,
            clean.f1,
            clean.hits_at_1,
            clean.em
        );
    }
    if let Some(attacked) = &report.attacked {
        let qa = &attacked.qa;
        let _ = writeln!(
            out,
            "attacked (n={}): hit {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  hits@1 {:.4}  em {:.4}",
            qa.denominator, qa.hit, qa.precision, qa.recall, qa.f1, qa.hits_at_1, qa.em
        );
        let adv = &attacked.adversarial;
        let _ = writeln!(
            out,
            "adversarial: a-precision {:.4}  a-h@1 {:.4}  a-mrr {:.4}",
            adv.a_precision, adv.a_h1, adv.a_mrr
        );
        let stage = &attacked.stage;
        let fmt_opt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.4}"),
            None => "undefined".to_string(),
        };
        let _ = writeln!(
            out,
            "stages: a-rr {:.4} ({}/{})  a-gr {} ({}/{})  a-precision-dagger {}",
            stage.a_rr,
            stage.retrieved_count,
            stage.total,
            fmt_opt(stage.a_gr),
            stage.generated_among_retrieved,
            stage.retrieved_count,
            fmt_opt(stage.a_precision_dagger)
        );
        let drops = &attacked.relative_drop;
        let _ = writeln!(
            out,
            "relative drop vs clean: precision {}  f1 {}  em {}",
            fmt_opt(drops.precision),
            fmt_opt(drops.f1),
            fmt_opt(drops.em)
        );
    }
    out
}
