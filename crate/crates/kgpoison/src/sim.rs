//! Deterministic stand-ins for the retrieve-then-generate pipeline under
//! attack: a relation-path planner, two retrievers (path grounding and
//! scored top-k subgraph), evidence-prompt serialization, a mock generator,
//! and detection of planted evidence.
//!
//! These simulators trade fidelity for inspectability: every stage is a
//! pure function over an immutable graph, so an attack's effect can be
//! traced triple by triple. Remote LLM generation plugs in through the same
//! client protocol as adversarial candidate generation and is parsed under
//! rules fixed here, so different backends remain comparable.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::client::TextGenClient;
use crate::error::Result;
use crate::grounding::{
    ground_relation_path, shortest_relation_paths, ReasoningPath, RelationPath,
};
use crate::kg::{Direction, EntityId, GraphView, Triple};
use crate::poison::PerturbationSet;
use crate::text::{jaccard, normalize, strip_list_marker, tokens};

/// Version tag of the shipped prompt templates, recorded in run manifests.
pub const PROMPT_TEMPLATE_VERSION: &str = include_str!("../resources/templates/VERSION");

/// Template for answer generation over serialized evidence.
pub const QA_PROMPT_TEMPLATE: &str = include_str!("../resources/templates/qa_prompt.txt");

/// Template asking a remote model to propose relation paths.
pub const PATH_PROMPT_TEMPLATE: &str = include_str!("../resources/templates/relation_paths.txt");

/// What an evidence set is made of.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    Paths,
    Triples,
}

/// One retrieved unit of evidence.
#[derive(Clone, Debug, PartialEq)]
pub enum EvidenceItem {
    Path(ReasoningPath),
    Triple(Triple),
}

impl EvidenceItem {
    /// The constituent graph triples of this item (a triple is its own
    /// single constituent).
    pub fn triples(&self) -> Vec<Triple> {
        match self {
            EvidenceItem::Path(p) => p.triples(),
            EvidenceItem::Triple(t) => vec![*t],
        }
    }

    /// The answer-like endpoint: a path's terminal, a triple's tail.
    pub fn terminal(&self) -> EntityId {
        match self {
            EvidenceItem::Path(p) => p.terminal(),
            EvidenceItem::Triple(t) => t.tail,
        }
    }

    /// Render for prompts: paths as arrow chains, triples as tuples.
    pub fn render(&self, graph: &impl GraphView) -> String {
        match self {
            EvidenceItem::Path(p) => p.render(graph),
            EvidenceItem::Triple(t) => format!(
                "({}, {}, {})",
                graph.entity_label(t.head),
                graph.relation_label(t.relation),
                graph.entity_label(t.tail)
            ),
        }
    }

    pub fn validates_against(&self, graph: &impl GraphView) -> bool {
        match self {
            EvidenceItem::Path(p) => p.validates_against(graph),
            EvidenceItem::Triple(t) => graph.contains_triple(t),
        }
    }
}

/// An evidence item with its retrieval score.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredEvidence {
    pub item: EvidenceItem,
    pub score: f64,
}

/// Ranked retrieval output G_q; scores are non-increasing down the list.
#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceSet {
    pub kind: EvidenceKind,
    pub items: Vec<ScoredEvidence>,
    pub truncated: bool,
}

impl EvidenceSet {
    pub fn empty(kind: EvidenceKind) -> Self {
        EvidenceSet {
            kind,
            items: Vec::new(),
            truncated: false,
        }
    }

    /// Evidence rendered one line per item, in rank order.
    pub fn lines(&self, graph: &impl GraphView) -> Vec<String> {
        self.items.iter().map(|s| s.item.render(graph)).collect()
    }
}

/// Where a prediction came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSource {
    Mock,
    Remote,
}

/// Ranked answer list P; order feeds Hits@1 / A-H@1 / A-MRR.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub answers: Vec<String>,
    pub source: PredictionSource,
}

/// Simulated planner and path supervision oracle: the union of all shortest
/// relation paths from each topic to each beacon, deduplicated and sorted by
/// (length, relation ids). The attacker calls this with its targets as
/// beacons; the simulated pipeline calls it with whatever beacons the
/// harness supplies.
pub fn plan_relation_paths_oracle(
    graph: &impl GraphView,
    topic_entities: &[EntityId],
    beacon_entities: &[EntityId],
    max_hops: usize,
) -> Result<Vec<RelationPath>> {
    let mut set: BTreeSet<RelationPath> = BTreeSet::new();
    for &topic in topic_entities {
        for &beacon in beacon_entities {
            set.extend(shortest_relation_paths(graph, topic, beacon, max_hops)?);
        }
    }
    let mut paths: Vec<RelationPath> = set.into_iter().collect();
    paths.sort_by(|a, b| {
        a.hop_count()
            .cmp(&b.hop_count())
            .then_with(|| a.relations().cmp(b.relations()))
    });
    Ok(paths)
}

/// Path-grounding retriever: instantiate each planned path from each topic
/// entity, in plan order, scoring every instantiation of the rank-r path as
/// 1/(r+1). `cap` bounds the total item count.
pub fn retrieve_by_paths(
    graph: &impl GraphView,
    topic_entities: &[EntityId],
    paths: &[RelationPath],
    cap: usize,
) -> Result<EvidenceSet> {
    let mut out = EvidenceSet::empty(EvidenceKind::Paths);
    for (rank, path) in paths.iter().enumerate() {
        let score = 1.0 / (rank as f64 + 1.0);
        for &topic in topic_entities {
            let remaining = cap - out.items.len();
            // Ask for one more than we can keep so an exact-fit grounding
            // is distinguishable from a truncated one.
            let grounded = ground_relation_path(graph, topic, path, remaining + 1)?;
            for p in grounded.paths.into_iter() {
                if out.items.len() >= cap {
                    out.truncated = true;
                    return Ok(out);
                }
                out.items.push(ScoredEvidence {
                    item: EvidenceItem::Path(p),
                    score,
                });
            }
            if grounded.truncated {
                out.truncated = true;
                return Ok(out);
            }
        }
    }
    Ok(out)
}

/// Undirected hop distance of every entity from the nearest topic entity.
fn hop_distances(graph: &impl GraphView, topic_entities: &[EntityId]) -> BTreeMap<EntityId, usize> {
    let mut dist: BTreeMap<EntityId, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for &t in topic_entities {
        if let Entry::Vacant(slot) = dist.entry(t) {
            slot.insert(0);
            queue.push_back(t);
        }
    }
    while let Some(e) = queue.pop_front() {
        let d = dist[&e];
        for direction in [Direction::Forward, Direction::Reverse] {
            for (_, n) in graph.neighbors(e, direction) {
                if let std::collections::btree_map::Entry::Vacant(slot) = dist.entry(n) {
                    slot.insert(d + 1);
                    queue.push_back(n);
                }
            }
        }
    }
    dist
}

/// Distance-term weight in the subgraph scorer.
const SUBGRAPH_DISTANCE_WEIGHT: f64 = 0.5;

/// Top-k subgraph retriever with a transparent two-signal scorer: token
/// overlap between question and verbalized triple, plus proximity of the
/// triple's head to the topic entities. Ties break by label tuple so the
/// ranking never depends on interning order.
pub fn retrieve_subgraph_topk(
    graph: &impl GraphView,
    question: &str,
    topic_entities: &[EntityId],
    k: usize,
) -> EvidenceSet {
    let question_tokens = tokens(question);
    let distances = hop_distances(graph, topic_entities);
    let mut scored: Vec<(ScoredEvidence, (String, String, String))> = graph
        .triples()
        .into_iter()
        .map(|t| {
            let labels = (
                graph.entity_label(t.head).to_string(),
                graph.relation_label(t.relation).to_string(),
                graph.entity_label(t.tail).to_string(),
            );
            let verbalized = format!("{} {} {}", labels.0, labels.1, labels.2);
            let overlap = jaccard(&question_tokens, &tokens(&verbalized));
            let proximity = distances
                .get(&t.head)
                .map(|&d| SUBGRAPH_DISTANCE_WEIGHT / (1.0 + d as f64))
                .unwrap_or(0.0);
            (
                ScoredEvidence {
                    item: EvidenceItem::Triple(t),
                    score: overlap + proximity,
                },
                labels,
            )
        })
        .collect();
    scored.sort_by(|a, b| {
        b.0.score
            .partial_cmp(&a.0.score)
            .expect("triple scores are finite")
            .then_with(|| a.1.cmp(&b.1))
    });
    let truncated = scored.len() > k;
    EvidenceSet {
        kind: EvidenceKind::Triples,
        items: scored.into_iter().take(k).map(|(s, _)| s).collect(),
        truncated,
    }
}

/// Serialize evidence into the QA prompt: instruction, question, one line
/// per evidence item in rank order. Byte-identical for identical inputs.
pub fn serialize_evidence_prompt(
    graph: &impl GraphView,
    question: &str,
    evidence: &EvidenceSet,
) -> String {
    QA_PROMPT_TEMPLATE
        .replace("{question}", question)
        .replace("{evidence}", &evidence.lines(graph).join("\n"))
}

/// Deterministic generator closing the loop without an LLM: answers are the
/// answer-like endpoints of the evidence, ranked by how much evidence
/// supports them (count, then earliest rank, then label).
pub fn mock_generate(
    graph: &impl GraphView,
    evidence: &EvidenceSet,
    max_answers: usize,
) -> Prediction {
    struct Support {
        count: usize,
        best_rank: usize,
    }
    let mut support: BTreeMap<EntityId, Support> = BTreeMap::new();
    for (rank, scored) in evidence.items.iter().enumerate() {
        let entity = scored.item.terminal();
        support
            .entry(entity)
            .and_modify(|s| s.count += 1)
            .or_insert(Support {
                count: 1,
                best_rank: rank,
            });
    }
    let mut ranked: Vec<(EntityId, Support)> = support.into_iter().collect();
    ranked.sort_by(|a, b| {
        b.1.count
            .cmp(&a.1.count)
            .then_with(|| a.1.best_rank.cmp(&b.1.best_rank))
            .then_with(|| graph.entity_label(a.0).cmp(graph.entity_label(b.0)))
    });
    Prediction {
        answers: ranked
            .into_iter()
            .take(max_answers)
            .map(|(e, _)| graph.entity_label(e).to_string())
            .collect(),
        source: PredictionSource::Mock,
    }
}

/// Parse a remote completion into ranked answers: everything after the
/// first `Answers:` line, one answer per line, list markers stripped,
/// normalized, deduplicated in order. No marker line means no answers.
pub fn parse_remote_answers(completion: &str, max_answers: usize) -> Vec<String> {
    let mut answers = Vec::new();
    let mut in_answers = false;
    for line in completion.lines() {
        if !in_answers {
            if line.trim().eq_ignore_ascii_case("answers:") {
                in_answers = true;
            }
            continue;
        }
        let answer = normalize(strip_list_marker(line));
        if answer.is_empty() || answers.contains(&answer) {
            continue;
        }
        answers.push(answer);
        if answers.len() >= max_answers {
            break;
        }
    }
    answers
}

/// Generate answers with a remote model over the serialized evidence.
pub fn remote_generate(
    graph: &impl GraphView,
    question: &str,
    evidence: &EvidenceSet,
    client: &dyn TextGenClient,
    max_answers: usize,
) -> Result<Prediction> {
    let prompt = serialize_evidence_prompt(graph, question, evidence);
    let completions = client.complete(&prompt, 1)?;
    let answers = completions
        .first()
        .map(|c| parse_remote_answers(c, max_answers))
        .unwrap_or_default();
    Ok(Prediction {
        answers,
        source: PredictionSource::Remote,
    })
}

/// Ask a remote model for candidate relation paths instead of using the
/// shortest-path oracle. Lines are parsed as ` -> `-separated relation
/// labels; lines mentioning unknown relations or exceeding `max_hops` are
/// dropped (the model may hallucinate labels; grounding requires real ones).
pub fn remote_relation_paths(
    graph: &impl GraphView,
    question: &str,
    client: &dyn TextGenClient,
    max_hops: usize,
) -> Result<Vec<RelationPath>> {
    let prompt = PATH_PROMPT_TEMPLATE
        .replace("{question}", question)
        .replace("{max_hops}", &max_hops.to_string());
    let completions = client.complete(&prompt, 1)?;
    let mut paths = Vec::new();
    for completion in completions {
        for line in completion.lines() {
            let line = strip_list_marker(line);
            if line.is_empty() {
                continue;
            }
            let labels: Vec<&str> = line.split("->").map(str::trim).collect();
            if labels.is_empty() || labels.len() > max_hops {
                continue;
            }
            let resolved: Option<Vec<_>> = labels.iter().map(|l| graph.relation_id(l)).collect();
            if let Some(relations) = resolved {
                if let Ok(path) = RelationPath::new(relations) {
                    if !paths.contains(&path) {
                        paths.push(path);
                    }
                }
            }
        }
    }
    Ok(paths)
}

/// Whether planted triples made it into retrieved evidence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Detection {
    /// Any inserted triple appears as a constituent of any evidence item.
    pub retrieved: bool,
    /// Some attack chain is contained in the evidence in its entirety —
    /// the strict variant of the retrieval predicate.
    pub full_chain: bool,
    /// Targets whose planted triples were found.
    pub matched_targets: BTreeSet<EntityId>,
}

/// Scan evidence for planted triples. `retrieved` fires on any single
/// inserted triple (a fallback chain's middle edge alone counts);
/// `full_chain` additionally requires every triple of some one chain.
pub fn detect_adversarial_evidence(evidence: &EvidenceSet, pset: &PerturbationSet) -> Detection {
    let inserted = pset.all_triples();
    let mut found: BTreeSet<Triple> = BTreeSet::new();
    for scored in &evidence.items {
        for t in scored.item.triples() {
            if inserted.contains(&t) {
                found.insert(t);
            }
        }
    }
    let mut matched_targets = BTreeSet::new();
    let mut full_chain = false;
    for entry in &pset.entries {
        let hit = entry.planted.iter().any(|p| found.contains(&p.triple));
        if hit {
            if let Some(target) = entry.target {
                matched_targets.insert(target);
            }
        }
        let mut chains: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
        for p in &entry.planted {
            let counts = chains.entry(p.chain).or_insert((0, 0));
            counts.0 += 1;
            if found.contains(&p.triple) {
                counts.1 += 1;
            }
        }
        if chains
            .values()
            .any(|&(total, got)| total > 0 && got == total)
        {
            full_chain = true;
        }
    }
    Detection {
        retrieved: !found.is_empty(),
        full_chain,
        matched_targets,
    }
}
