//! Knowledge-graph poisoning testbed for KG-backed retrieval-augmented QA.
//!
//! The crate implements an insertion-only attack on question answering
//! systems that retrieve from a knowledge graph: given a question, the
//! attacker picks misleading target answers, then inserts a small budget of
//! triples that complete plausible-looking inference chains from the
//! question's topic entities to those targets — using only entities and
//! relations the graph already contains. A deterministic simulation of the
//! retrieve-and-generate pipeline and a metric suite measure how far the
//! inserted triples propagate: into retrieved evidence, into generated
//! answers, and into aggregate answer quality.
//!
//! # Tour (one runnable example per capability)
//!
//! * `examples/build_graph.rs` — interning label triples into a
//!   [`kg::KnowledgeGraph`] and querying adjacency.
//! * `examples/ground_paths.rs` — instantiating relation paths with
//!   [`grounding`]: groundings, terminal sets, shortest relation paths.
//! * `examples/adversarial_targets.rs` — candidate answers fuzzily aligned
//!   onto graph entities with [`adversary`].
//! * `examples/craft_attack.rs` — budgeted perturbation crafting with
//!   [`poison`], plus the overlay graph it produces.
//! * `examples/retrieve_and_generate.rs` — the simulated pipeline in
//!   [`sim`]: planning, both retrievers, the mock generator, detection.
//! * `examples/run_experiment.rs` — a full clean-versus-attacked evaluation
//!   on the synthetic benchmark via [`harness`], with reports on disk.
//! * `examples/remote_client.rs` — pointing the same pipeline at an HTTP
//!   text-generation endpoint with [`client`] (needs an API key in the
//!   environment; exits gracefully without one).
//!
//! # Module map
//!
//! Foundations: [`kg`] (graph store and poisoning overlay), [`text`]
//! (normalization and similarity), [`seeding`] (per-question RNG streams),
//! [`error`]. Data: [`dataset`] (JSONL QA records), [`synthetic`] (the
//! closed-loop benchmark), [`fixtures`] (a small worked example graph).
//! Attack: [`adversary`] (target selection), [`poison`] (perturbation
//! crafting and the random baseline). Evaluation: [`grounding`] (path
//! semantics), [`sim`] (retrievers, generators, detection), [`metrics`]
//! (QA and manipulation metrics), [`harness`] (orchestration, reports, the
//! CLI's worker functions), [`client`] (HTTP text generation).
//!
//! # Determinism
//!
//! Every stochastic choice draws from a stream derived from
//! `(global_seed, question_id, domain)` — see [`seeding::derive_rng`] — so
//! runs with the mock generator are reproducible byte-for-byte regardless
//! of thread scheduling, and adding questions to a dataset never changes
//! the randomness other questions see.

pub mod adversary;
pub mod client;
pub mod dataset;
pub mod error;
pub mod fixtures;
pub mod grounding;
pub mod harness;
pub mod kg;
pub mod metrics;
pub mod poison;
pub mod seeding;
pub mod sim;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
pub use kg::{EntityId, GraphView, KnowledgeGraph, PoisonedGraph, RelationId, Triple};
