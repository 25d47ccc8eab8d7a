//! Crate-wide error type shared by graph construction, attack crafting,
//! simulation, and the experiment harness.

use crate::kg::{EntityId, RelationId};

/// Everything that can go wrong across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An insertion referenced vocabulary absent from the base graph.
    /// Insertion-only attacks must reuse existing entities and relations, so
    /// this is a hard constraint violation, never a recoverable condition.
    #[error("stealth violation: triple ({head:?}, {relation:?}, {tail:?}) references vocabulary absent from the base graph")]
    StealthViolation {
        head: EntityId,
        relation: RelationId,
        tail: EntityId,
    },

    #[error("unknown entity id {0:?}")]
    UnknownEntity(EntityId),

    #[error("unknown relation id {0:?}")]
    UnknownRelation(RelationId),

    #[error("relation path must contain at least one relation")]
    EmptyRelationPath,

    #[error("no adversarial targets supplied")]
    EmptyTargetSet,

    #[error("no relation paths supplied")]
    EmptyPathSet,

    #[error("topic entities have no incident triples to corrupt")]
    IsolatedTopicEntity,

    #[error("line {line}: malformed dataset record: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("completion client failed after {attempts} attempt(s): {message}")]
    Client { attempts: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
