//! Dataset loading and serialization.
//!
//! Wire format is JSON Lines, one question per line:
//!
//! ```json
//! {"id": "q1", "question": "...", "q_entity": ["..."], "a_entity": ["..."],
//!  "graph": [["head", "relation", "tail"], ...]}
//! ```
//!
//! A line that is not valid JSON (or does not match the schema) is a hard
//! error carrying its line number: silently skipping corrupt input would bias
//! every downstream metric. A line that parses but fails domain validation —
//! empty graph, a topic entity missing from the graph, no gold answers —
//! becomes a [`RejectedRecord`] so counts still reconcile at report time.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kg::{GraphView, KnowledgeGraph};
use crate::text::normalize;

/// One QA instance as it appears on disk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub question: String,
    /// Topic entity labels (question anchors).
    pub q_entity: Vec<String>,
    /// Gold answer labels.
    pub a_entity: Vec<String>,
    /// Subgraph as (head, relation, tail) label triples.
    pub graph: Vec<(String, String, String)>,
}

/// A record that parsed but cannot be evaluated, with the reason retained for
/// the final report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRecord {
    pub id: String,
    pub line: usize,
    pub reason: String,
}

/// Parsed dataset plus the rejection list; `records.len() + rejected.len()`
/// equals the number of input lines.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub records: Vec<QuestionRecord>,
    pub rejected: Vec<RejectedRecord>,
}

impl Dataset {
    pub fn loaded(&self) -> usize {
        self.records.len() + self.rejected.len()
    }
}

/// A record bound to its interned graph and resolved topic ids.
#[derive(Clone, Debug)]
pub struct BoundQuestion {
    pub record: QuestionRecord,
    pub graph: KnowledgeGraph,
    pub topics: Vec<crate::kg::EntityId>,
}

/// Domain validation, separate from JSON parsing. Returns the reason a
/// record is unusable, or `None` when it is evaluable.
pub fn validation_error(record: &QuestionRecord) -> Option<String> {
    if record.id.trim().is_empty() {
        return Some("empty id".to_string());
    }
    if record.graph.is_empty() {
        return Some("empty graph".to_string());
    }
    if record.q_entity.is_empty() {
        return Some("no topic entities".to_string());
    }
    if record.a_entity.is_empty() {
        return Some("no gold answers".to_string());
    }
    let graph = KnowledgeGraph::from_raw_triples(
        record
            .graph
            .iter()
            .map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str())),
    );
    for topic in &record.q_entity {
        if graph.entity_id(topic).is_none() {
            return Some(format!("topic entity not in graph: {}", normalize(topic)));
        }
    }
    None
}

/// Intern the record's subgraph and resolve its topic entities. The caller
/// is expected to have validated the record; an unresolvable topic here is a
/// precondition violation.
pub fn bind_question(record: QuestionRecord) -> Result<BoundQuestion> {
    let graph = KnowledgeGraph::from_raw_triples(
        record
            .graph
            .iter()
            .map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str())),
    );
    let mut topics = Vec::with_capacity(record.q_entity.len());
    for topic in &record.q_entity {
        let id = graph.entity_id(topic).ok_or_else(|| {
            Error::Precondition(format!(
                "record {}: topic entity not in graph: {}",
                record.id,
                normalize(topic)
            ))
        })?;
        if !topics.contains(&id) {
            topics.push(id);
        }
    }
    Ok(BoundQuestion {
        record,
        graph,
        topics,
    })
}

fn parse_lines<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut dataset = Dataset::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: QuestionRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: line_no,
                message: e.to_string(),
            })?;
        match validation_error(&record) {
            Some(reason) => dataset.rejected.push(RejectedRecord {
                id: record.id,
                line: line_no,
                reason,
            }),
            None => dataset.records.push(record),
        }
    }
    Ok(dataset)
}

/// Load a JSONL dataset from disk. Blank lines are ignored; malformed JSON
/// aborts with the offending line number.
pub fn load_jsonl(path: &Path) -> Result<Dataset> {
    let file = File::open(path)?;
    parse_lines(BufReader::new(file))
}

/// Parse a JSONL dataset already held in memory (tests, fixtures).
pub fn parse_jsonl(text: &str) -> Result<Dataset> {
    parse_lines(BufReader::new(text.as_bytes()))
}

/// Serialize records as JSONL, one compact object per line.
pub fn write_jsonl<W: Write>(mut writer: W, records: &[QuestionRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// A poisoned question on disk: the same record shape with the merged
/// (base plus inserted) graph, and a sidecar listing exactly which triples
/// were inserted so the clean graph can be recovered.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoisonedRecord {
    #[serde(flatten)]
    pub record: QuestionRecord,
    pub inserted_triples: Vec<(String, String, String)>,
}

/// SHA-256 of a file, as lowercase hex. Used to fingerprint the input
/// dataset in run manifests.
pub fn file_sha256(path: &Path) -> Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_line() -> String {
        serde_json::json!({
            "id": "q1",
            "question": "which country is manchester by the sea filmed in",
            "q_entity": ["Manchester by the Sea"],
            "a_entity": ["USA"],
            "graph": [
                ["Manchester by the Sea", "filmed_in_city", "Manchester MA"],
                ["Manchester MA", "city_in_country", "USA"]
            ]
        })
        .to_string()
    }

    #[test]
    fn round_trip_preserves_records() {
        let dataset = parse_jsonl(&sample_line()).unwrap();
        assert_eq!(dataset.records.len(), 1);
        assert!(dataset.rejected.is_empty());
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &dataset.records).unwrap();
        let again = parse_jsonl(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(again.records, dataset.records);
    }

    #[test]
    fn malformed_json_is_a_hard_error_with_line_number() {
        let text = format!("{}\n{{not json\n{}", sample_line(), sample_line());
        let err = parse_jsonl(&text).unwrap_err();
        match err {
            Error::MalformedRecord { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn schema_mismatch_is_also_malformed() {
        // Valid JSON, wrong shape: graph rows must be 3-element arrays.
        let text =
            r#"{"id":"q","question":"?","q_entity":["a"],"a_entity":["b"],"graph":[["a","r"]]}"#;
        assert!(matches!(
            parse_jsonl(text),
            Err(Error::MalformedRecord { line: 1, .. })
        ));
    }

    #[test]
    fn domain_invalid_records_are_rejected_not_dropped() {
        let bad_topic = serde_json::json!({
            "id": "q2",
            "question": "?",
            "q_entity": ["Nowhere"],
            "a_entity": ["USA"],
            "graph": [["a", "r", "b"]]
        })
        .to_string();
        let empty_graph = serde_json::json!({
            "id": "q3",
            "question": "?",
            "q_entity": ["a"],
            "a_entity": ["b"],
            "graph": []
        })
        .to_string();
        let text = format!("{}\n{}\n{}", sample_line(), bad_topic, empty_graph);
        let dataset = parse_jsonl(&text).unwrap();
        assert_eq!(dataset.records.len(), 1);
        assert_eq!(dataset.rejected.len(), 2);
        assert_eq!(dataset.loaded(), 3);
        assert_eq!(dataset.rejected[0].id, "q2");
        assert!(dataset.rejected[0].reason.contains("topic entity"));
        assert_eq!(dataset.rejected[1].id, "q3");
        assert_eq!(dataset.rejected[1].reason, "empty graph");
    }

    #[test]
    fn blank_lines_are_ignored() {
        let text = format!("\n{}\n\n", sample_line());
        let dataset = parse_jsonl(&text).unwrap();
        assert_eq!(dataset.loaded(), 1);
    }

    #[test]
    fn bind_resolves_topics_and_dedupes() {
        let mut dataset = parse_jsonl(&sample_line()).unwrap();
        let mut record = dataset.records.pop().unwrap();
        record.q_entity.push("manchester by the sea".to_string()); // dup after normalize
        let bound = bind_question(record).unwrap();
        assert_eq!(bound.topics.len(), 1);
        assert_eq!(
            bound.graph.entity_label(bound.topics[0]),
            "manchester by the sea"
        );
    }

    #[test]
    fn poisoned_record_round_trips_with_sidecar() {
        let dataset = parse_jsonl(&sample_line()).unwrap();
        let mut record = dataset.records[0].clone();
        let inserted = (
            "manchester ma".to_string(),
            "city_in_country".to_string(),
            "usa".to_string(),
        );
        record.graph.push(inserted.clone());
        let poisoned = PoisonedRecord {
            record,
            inserted_triples: vec![inserted],
        };
        let line = serde_json::to_string(&poisoned).unwrap();
        let back: PoisonedRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.inserted_triples.len(), 1);
        assert_eq!(back.record.graph.len(), 3);
        // The flattened record still parses as a plain QuestionRecord, so the
        // poisoned file can be fed straight back into evaluation.
        let plain: QuestionRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(plain.graph.len(), 3);
    }
}
