//! QA-quality and attack-effectiveness metrics, per question and aggregated.
//!
//! Answer matching is normalized-exact string equality (the same
//! normalization the graph store interns labels under); there are no alias
//! tables. Denominator conventions — what happens on empty predictions,
//! zero retrieved questions, and so on — are encoded here once and echoed
//! into every report so numbers stay interpretable: a ratio whose
//! denominator is zero is reported as undefined (`null`/`NA`), never as a
//! fake zero.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::RejectedRecord;
use crate::sim::Prediction;

/// Everything needed to score one question.
#[derive(Clone, Debug)]
pub struct QuestionOutcome {
    pub question_id: String,
    pub prediction: Prediction,
    /// Normalized gold answer labels.
    pub gold: BTreeSet<String>,
    /// Normalized adversarial target labels (empty on clean runs).
    pub targets: BTreeSet<String>,
    /// Whether any planted triple appeared in retrieved evidence.
    pub adversarial_retrieved: bool,
}

impl QuestionOutcome {
    /// At least one predicted answer is an adversarial target.
    pub fn adversarial_generated(&self) -> bool {
        self.prediction
            .answers
            .iter()
            .any(|a| self.targets.contains(a))
    }
}

/// Conventional QA metrics for one question; each value lies in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaMetrics {
    pub hit: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub hits_at_1: f64,
    pub em: f64,
}

/// Attack-success metrics for one question; each value lies in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialMetrics {
    pub a_precision: f64,
    pub a_h1: f64,
    pub a_mrr: f64,
}

fn as_flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Score prediction quality against gold answers.
///
/// hit: any gold answer predicted. precision/recall over the answer sets
/// (empty prediction scores precision 0, keeping means total). f1: harmonic
/// mean, 0 when both inputs are 0. hits_at_1: top-ranked answer is gold.
/// em: predicted set equals gold set exactly.
pub fn qa_metrics(outcome: &QuestionOutcome) -> QaMetrics {
    let predicted: BTreeSet<&str> = outcome
        .prediction
        .answers
        .iter()
        .map(String::as_str)
        .collect();
    let overlap = predicted
        .iter()
        .filter(|a| outcome.gold.contains(**a))
        .count() as f64;
    let precision = if predicted.is_empty() {
        0.0
    } else {
        overlap / predicted.len() as f64
    };
    let recall = overlap / outcome.gold.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let hits_at_1 = as_flag(
        outcome
            .prediction
            .answers
            .first()
            .is_some_and(|a| outcome.gold.contains(a)),
    );
    let em = as_flag(
        predicted
            == outcome
                .gold
                .iter()
                .map(String::as_str)
                .collect::<BTreeSet<&str>>(),
    );
    QaMetrics {
        hit: as_flag(overlap > 0.0),
        precision,
        recall,
        f1,
        hits_at_1,
        em,
    }
}

/// Score how much of the prediction the attacker controls.
///
/// a_precision: fraction of predicted answers that are adversarial targets.
/// a_h1: top-ranked answer is a target. a_mrr: reciprocal rank of the
/// highest-ranked target answer, 0 when no target was predicted.
pub fn adversarial_metrics(outcome: &QuestionOutcome) -> AdversarialMetrics {
    let answers = &outcome.prediction.answers;
    let matched = answers
        .iter()
        .filter(|a| outcome.targets.contains(*a))
        .count() as f64;
    let a_precision = if answers.is_empty() {
        0.0
    } else {
        matched / answers.len() as f64
    };
    let first_target_rank = answers
        .iter()
        .position(|a| outcome.targets.contains(a))
        .map(|idx| idx + 1);
    AdversarialMetrics {
        a_precision,
        a_h1: as_flag(first_target_rank == Some(1)),
        a_mrr: first_target_rank.map(|r| 1.0 / r as f64).unwrap_or(0.0),
    }
}

/// Per-question inputs to the stage ratios, derivable from an outcome or
/// from a persisted report row (so recomputation shares this code).
#[derive(Clone, Copy, Debug)]
pub struct StageObservation {
    pub adversarial_retrieved: bool,
    pub adversarial_generated: bool,
    pub a_precision: f64,
}

impl From<&QuestionOutcome> for StageObservation {
    fn from(outcome: &QuestionOutcome) -> Self {
        StageObservation {
            adversarial_retrieved: outcome.adversarial_retrieved,
            adversarial_generated: outcome.adversarial_generated(),
            a_precision: adversarial_metrics(outcome).a_precision,
        }
    }
}

/// Where in the pipeline attacks succeed or die.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRatios {
    /// Fraction of questions whose evidence contained any planted triple.
    pub a_rr: f64,
    /// Among retrieved questions, fraction that generated a target answer;
    /// undefined when nothing was retrieved.
    pub a_gr: Option<f64>,
    /// Mean a_precision over questions that generated a target answer;
    /// undefined when none did.
    pub a_precision_dagger: Option<f64>,
    pub total: usize,
    pub retrieved_count: usize,
    pub generated_among_retrieved: usize,
    pub generated_total: usize,
}

/// Aggregate the stage ratios; `None` for an empty observation list.
pub fn stage_ratios(observations: &[StageObservation]) -> Option<StageRatios> {
    if observations.is_empty() {
        return None;
    }
    let total = observations.len();
    let retrieved: Vec<_> = observations
        .iter()
        .filter(|o| o.adversarial_retrieved)
        .collect();
    let generated_among_retrieved = retrieved.iter().filter(|o| o.adversarial_generated).count();
    let generated: Vec<_> = observations
        .iter()
        .filter(|o| o.adversarial_generated)
        .collect();
    Some(StageRatios {
        a_rr: retrieved.len() as f64 / total as f64,
        a_gr: (!retrieved.is_empty())
            .then(|| generated_among_retrieved as f64 / retrieved.len() as f64),
        a_precision_dagger: (!generated.is_empty())
            .then(|| generated.iter().map(|o| o.a_precision).sum::<f64>() / generated.len() as f64),
        total,
        retrieved_count: retrieved.len(),
        generated_among_retrieved,
        generated_total: generated.len(),
    })
}

/// Attacked-run fields of one report row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackedRow {
    pub answers: Vec<String>,
    pub qa: QaMetrics,
    pub adversarial: AdversarialMetrics,
    /// Normalized target labels in attack priority order.
    pub targets: Vec<String>,
    /// Distinct triples inserted for this question after deduplication.
    pub inserted: usize,
    pub grounded_prefix_inserted: usize,
    pub fallback_inserted: usize,
    pub random_inserted: usize,
    /// Any planted triple appeared in evidence.
    pub retrieved: bool,
    /// Some complete attack chain appeared in evidence.
    pub full_chain_retrieved: bool,
    /// Some predicted answer is a target.
    pub generated: bool,
}

/// One evaluated question in the report: clean results always, attacked
/// results when an attack ran.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionRow {
    pub question_id: String,
    pub question: String,
    pub gold: Vec<String>,
    pub clean_answers: Vec<String>,
    pub clean: QaMetrics,
    pub attacked: Option<AttackedRow>,
}

/// Load/evaluate/reject bookkeeping; `evaluated + rejected = loaded` always.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    pub loaded: usize,
    pub evaluated: usize,
    pub rejected: usize,
}

/// Mean QA metrics over an explicit denominator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaAggregate {
    pub denominator: usize,
    pub hit: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub hits_at_1: f64,
    pub em: f64,
}

/// Mean adversarial metrics over an explicit denominator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialAggregate {
    pub denominator: usize,
    pub a_precision: f64,
    pub a_h1: f64,
    pub a_mrr: f64,
}

/// Relative degradation (clean − attacked) / clean per QA metric;
/// undefined when the clean mean is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeDrops {
    pub hit: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub hits_at_1: Option<f64>,
    pub em: Option<f64>,
}

/// Attacked-side aggregates, present only when an attack ran on ≥ 1
/// question.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackedAggregate {
    pub qa: QaAggregate,
    pub adversarial: AdversarialAggregate,
    pub stage: StageRatios,
    pub relative_drop: RelativeDrops,
}

/// The full machine-readable report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Denominator and matching conventions, spelled out so the numbers
    /// can't be misread.
    pub conventions: Vec<String>,
    pub counts: RunCounts,
    /// `None` only when zero questions were evaluated.
    pub clean: Option<QaAggregate>,
    /// `None` when no attack ran (clean-run immunity: absent, not zero).
    pub attacked: Option<AttackedAggregate>,
    pub rejected: Vec<RejectedRecord>,
    pub per_question: Vec<QuestionRow>,
}

/// The conventions block included in every report.
pub fn metric_conventions() -> Vec<String> {
    [
        "answers, gold, and targets are normalized (lowercased, whitespace collapsed); matching is exact string equality with no alias tables",
        "precision and a_precision over an empty prediction list are 0, keeping means total",
        "f1 is 0 when precision and recall are both 0",
        "a_gr denominator = questions with any planted triple retrieved; null when that denominator is 0",
        "a_precision_dagger denominator = questions predicting at least one target; null when that denominator is 0",
        "aggregates are arithmetic means over their stated denominators; undefined ratios are null in JSON and NA in tables",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn mean<I: Iterator<Item = f64>>(iter: I, denominator: usize) -> f64 {
    iter.sum::<f64>() / denominator as f64
}

fn qa_aggregate<'a>(
    rows: impl Fn() -> Box<dyn Iterator<Item = &'a QaMetrics> + 'a>,
    n: usize,
) -> QaAggregate {
    QaAggregate {
        denominator: n,
        hit: mean(rows().map(|m| m.hit), n),
        precision: mean(rows().map(|m| m.precision), n),
        recall: mean(rows().map(|m| m.recall), n),
        f1: mean(rows().map(|m| m.f1), n),
        hits_at_1: mean(rows().map(|m| m.hits_at_1), n),
        em: mean(rows().map(|m| m.em), n),
    }
}

fn relative_drop(clean: f64, attacked: f64) -> Option<f64> {
    (clean != 0.0).then(|| (clean - attacked) / clean)
}

/// Fold per-question rows into the aggregate report. Run and recompute
/// (`report` subcommand) both call this, so the two can never drift.
/// Rows are sorted by question id first — aggregation order is fixed
/// regardless of how workers finished.
pub fn build_report(
    mut rows: Vec<QuestionRow>,
    rejected: Vec<RejectedRecord>,
    loaded: usize,
) -> MetricsReport {
    rows.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    let counts = RunCounts {
        loaded,
        evaluated: rows.len(),
        rejected: rejected.len(),
    };
    let clean = (!rows.is_empty())
        .then(|| qa_aggregate(|| Box::new(rows.iter().map(|r| &r.clean)), rows.len()));

    let attacked_rows: Vec<(&QuestionRow, &AttackedRow)> = rows
        .iter()
        .filter_map(|r| r.attacked.as_ref().map(|a| (r, a)))
        .collect();
    let attacked = if attacked_rows.is_empty() {
        None
    } else {
        let n = attacked_rows.len();
        let qa = qa_aggregate(|| Box::new(attacked_rows.iter().map(|(_, a)| &a.qa)), n);
        let adversarial = AdversarialAggregate {
            denominator: n,
            a_precision: mean(
                attacked_rows.iter().map(|(_, a)| a.adversarial.a_precision),
                n,
            ),
            a_h1: mean(attacked_rows.iter().map(|(_, a)| a.adversarial.a_h1), n),
            a_mrr: mean(attacked_rows.iter().map(|(_, a)| a.adversarial.a_mrr), n),
        };
        let observations: Vec<StageObservation> = attacked_rows
            .iter()
            .map(|(_, a)| StageObservation {
                adversarial_retrieved: a.retrieved,
                adversarial_generated: a.generated,
                a_precision: a.adversarial.a_precision,
            })
            .collect();
        let stage = stage_ratios(&observations).expect("attacked rows nonempty");
        // Drops compare clean vs attacked means over the attacked subset,
        // so both sides cover the same questions.
        let clean_on_attacked =
            qa_aggregate(|| Box::new(attacked_rows.iter().map(|(r, _)| &r.clean)), n);
        let relative_drop = RelativeDrops {
            hit: relative_drop(clean_on_attacked.hit, qa.hit),
            precision: relative_drop(clean_on_attacked.precision, qa.precision),
            recall: relative_drop(clean_on_attacked.recall, qa.recall),
            f1: relative_drop(clean_on_attacked.f1, qa.f1),
            hits_at_1: relative_drop(clean_on_attacked.hits_at_1, qa.hits_at_1),
            em: relative_drop(clean_on_attacked.em, qa.em),
        };
        Some(AttackedAggregate {
            qa,
            adversarial,
            stage,
            relative_drop,
        })
    };

    MetricsReport {
        conventions: metric_conventions(),
        counts,
        clean,
        attacked,
        rejected,
        per_question: rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::PredictionSource;

    fn outcome(answers: &[&str], gold: &[&str], targets: &[&str]) -> QuestionOutcome {
        QuestionOutcome {
            question_id: "q".to_string(),
            prediction: Prediction {
                answers: answers.iter().map(|s| s.to_string()).collect(),
                source: PredictionSource::Mock,
            },
            gold: gold.iter().map(|s| s.to_string()).collect(),
            targets: targets.iter().map(|s| s.to_string()).collect(),
            adversarial_retrieved: false,
        }
    }

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} != {b}");
    }

    #[test]
    fn qa_metrics_partial_overlap() {
        let m = qa_metrics(&outcome(&["a", "b", "c"], &["a", "d"], &[]));
        close(m.precision, 1.0 / 3.0);
        close(m.recall, 0.5);
        close(m.f1, 0.4);
        close(m.hit, 1.0);
        close(m.hits_at_1, 1.0);
        close(m.em, 0.0);
    }

    #[test]
    fn qa_metrics_perfect_prediction() {
        let m = qa_metrics(&outcome(&["a", "d"], &["a", "d"], &[]));
        assert_eq!(
            m,
            QaMetrics {
                hit: 1.0,
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                hits_at_1: 1.0,
                em: 1.0
            }
        );
    }

    #[test]
    fn hit_without_top_rank_scores_hits_at_1_zero() {
        // A gold answer buried at rank 4 among 5 gold answers.
        let m = qa_metrics(&outcome(
            &["italian", "german", "french", "spanish"],
            &["spanish", "english", "sindhi", "punjabi", "urdu"],
            &[],
        ));
        close(m.hit, 1.0);
        close(m.hits_at_1, 0.0);
        close(m.em, 0.0);
        close(m.precision, 0.25);
        close(m.recall, 0.2);
        close(m.f1, 2.0 / 9.0);
    }

    #[test]
    fn empty_prediction_scores_zero_not_undefined() {
        let m = qa_metrics(&outcome(&[], &["a"], &[]));
        assert_eq!(
            m,
            QaMetrics {
                hit: 0.0,
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
                hits_at_1: 0.0,
                em: 0.0
            }
        );
    }

    #[test]
    fn adversarial_metrics_rank_sensitivity() {
        let m = adversarial_metrics(&outcome(&["x", "y", "z", "w"], &["g"], &["y", "w"]));
        close(m.a_precision, 0.5);
        close(m.a_h1, 0.0);
        close(m.a_mrr, 0.5);

        let m = adversarial_metrics(&outcome(&["y", "x"], &["g"], &["y"]));
        close(m.a_h1, 1.0);
        close(m.a_mrr, 1.0);

        let m = adversarial_metrics(&outcome(&["x", "z"], &["g"], &["y", "w"]));
        assert_eq!(
            m,
            AdversarialMetrics {
                a_precision: 0.0,
                a_h1: 0.0,
                a_mrr: 0.0
            }
        );
        // Clean runs carry empty target sets: everything stays 0.
        let m = adversarial_metrics(&outcome(&["x"], &["g"], &[]));
        assert_eq!(m.a_precision + m.a_h1 + m.a_mrr, 0.0);
    }

    #[test]
    fn stage_ratios_count_per_stage() {
        let mut observations = Vec::new();
        for i in 0..10 {
            observations.push(StageObservation {
                adversarial_retrieved: i < 9,
                adversarial_generated: i < 5,
                a_precision: 0.5,
            });
        }
        let s = stage_ratios(&observations).unwrap();
        close(s.a_rr, 0.9);
        close(s.a_gr.unwrap(), 5.0 / 9.0);
        close(s.a_precision_dagger.unwrap(), 0.5);
        assert_eq!((s.total, s.retrieved_count), (10, 9));
        assert_eq!((s.generated_among_retrieved, s.generated_total), (5, 5));
    }

    #[test]
    fn zero_denominators_are_undefined_not_zero() {
        let observations = vec![StageObservation {
            adversarial_retrieved: false,
            adversarial_generated: false,
            a_precision: 0.0,
        }];
        let s = stage_ratios(&observations).unwrap();
        close(s.a_rr, 0.0);
        assert_eq!(s.a_gr, None);
        assert_eq!(s.a_precision_dagger, None);
        assert!(stage_ratios(&[]).is_none());
    }

    #[test]
    fn dagger_counts_generation_outside_retrieval() {
        // One question generated a target although no planted triple was
        // retrieved (the target also existed as genuine evidence): it feeds
        // a_precision_dagger but not a_gr.
        let observations = vec![
            StageObservation {
                adversarial_retrieved: false,
                adversarial_generated: true,
                a_precision: 1.0,
            },
            StageObservation {
                adversarial_retrieved: true,
                adversarial_generated: false,
                a_precision: 0.0,
            },
        ];
        let s = stage_ratios(&observations).unwrap();
        close(s.a_rr, 0.5);
        close(s.a_gr.unwrap(), 0.0);
        close(s.a_precision_dagger.unwrap(), 1.0);
    }

    #[test]
    fn metric_identities_hold_on_seeded_random_outcomes() {
        use rand::Rng;
        let mut rng = crate::seeding::derive_rng(41, "metrics-fuzz", "test");
        let vocab = ["a", "b", "c", "d", "e", "f", "g", "h"];
        for _ in 0..500 {
            let pick = |rng: &mut rand_chacha::ChaCha8Rng, max: usize| -> Vec<&str> {
                let n = rng.gen_range(0..=max);
                let mut out: Vec<&str> = Vec::new();
                for _ in 0..n {
                    let w = vocab[rng.gen_range(0..vocab.len())];
                    if !out.contains(&w) {
                        out.push(w);
                    }
                }
                out
            };
            let answers = pick(&mut rng, 6);
            let mut gold = pick(&mut rng, 4);
            if gold.is_empty() {
                gold.push("a");
            }
            let targets = pick(&mut rng, 4);
            let o = outcome(&answers, &gold, &targets);
            let qa = qa_metrics(&o);
            let adv = adversarial_metrics(&o);
            for v in [
                qa.hit,
                qa.precision,
                qa.recall,
                qa.f1,
                qa.hits_at_1,
                qa.em,
                adv.a_precision,
                adv.a_h1,
                adv.a_mrr,
            ] {
                assert!((0.0..=1.0).contains(&v));
            }
            assert!(qa.hit >= qa.hits_at_1);
            assert!(adv.a_mrr >= adv.a_h1);
            if qa.em == 1.0 {
                assert_eq!((qa.precision, qa.recall, qa.f1), (1.0, 1.0, 1.0));
            }
            if qa.precision * qa.recall == 0.0 {
                assert_eq!(qa.f1, 0.0);
            } else {
                let expect = 2.0 * qa.precision * qa.recall / (qa.precision + qa.recall);
                assert!((qa.f1 - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn report_aggregates_are_means_of_rows() {
        let row = |id: &str, clean_p: f64, attacked: Option<AttackedRow>| QuestionRow {
            question_id: id.to_string(),
            question: "?".to_string(),
            gold: vec!["g".to_string()],
            clean_answers: vec![],
            clean: QaMetrics {
                hit: 1.0,
                precision: clean_p,
                recall: 1.0,
                f1: 1.0,
                hits_at_1: 1.0,
                em: 1.0,
            },
            attacked,
        };
        let attacked_row = AttackedRow {
            answers: vec![],
            qa: QaMetrics {
                hit: 0.0,
                precision: 0.5,
                recall: 0.0,
                f1: 0.0,
                hits_at_1: 0.0,
                em: 0.0,
            },
            adversarial: AdversarialMetrics {
                a_precision: 1.0,
                a_h1: 1.0,
                a_mrr: 1.0,
            },
            targets: vec!["t".to_string()],
            inserted: 2,
            grounded_prefix_inserted: 2,
            fallback_inserted: 0,
            random_inserted: 0,
            retrieved: true,
            full_chain_retrieved: true,
            generated: true,
        };
        // Rows arrive out of order; the report sorts them.
        let rows = vec![
            row("q2", 1.0, Some(attacked_row.clone())),
            row("q1", 0.5, Some(attacked_row)),
        ];
        let report = build_report(rows, Vec::new(), 2);
        assert_eq!(report.per_question[0].question_id, "q1");
        let clean = report.clean.unwrap();
        assert_eq!(clean.denominator, 2);
        close(clean.precision, 0.75);
        let attacked = report.attacked.unwrap();
        close(attacked.qa.precision, 0.5);
        close(attacked.adversarial.a_mrr, 1.0);
        close(attacked.stage.a_rr, 1.0);
        close(
            attacked.relative_drop.precision.unwrap(),
            (0.75 - 0.5) / 0.75,
        );
        // Clean em mean is 1.0, attacked 0.0 → full relative drop.
        close(attacked.relative_drop.em.unwrap(), 1.0);
        assert_eq!(
            (
                report.counts.loaded,
                report.counts.evaluated,
                report.counts.rejected
            ),
            (2, 2, 0)
        );
    }

    #[test]
    fn clean_only_report_has_no_attack_block() {
        let rows = vec![QuestionRow {
            question_id: "q1".to_string(),
            question: "?".to_string(),
            gold: vec!["g".to_string()],
            clean_answers: vec!["g".to_string()],
            clean: QaMetrics {
                hit: 1.0,
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                hits_at_1: 1.0,
                em: 1.0,
            },
            attacked: None,
        }];
        let report = build_report(rows, Vec::new(), 1);
        assert!(report.attacked.is_none());
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"attacked\":null"));
    }

    #[test]
    fn empty_run_report_is_all_undefined() {
        let report = build_report(Vec::new(), Vec::new(), 0);
        assert!(report.clean.is_none());
        assert!(report.attacked.is_none());
        assert_eq!(report.counts.evaluated, 0);
    }
}
