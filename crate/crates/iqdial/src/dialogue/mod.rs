//! Task domains, dialogue acts, belief tracking, and belief summarization.

mod acts;
mod belief;
mod domain;

pub use acts::{ActType, DialogueAct, ACT_TYPE_COUNT};
pub use belief::{focus_update, summarize, BeliefState, SUMMARY_ACT_BLOCK, SUMMARY_DB_BUCKETS};
pub use domain::{db_match_count, db_query, generate_db, load_domain, DomainSpec, Entity, SlotDef};

#[derive(Debug, thiserror::Error)]
pub enum DialogueError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed ontology {path}: {what}")]
    MalformedOntology { path: String, what: String },
    #[error("unknown slot {name}")]
    UnknownSlot { name: String },
    #[error("unknown value {value} for slot {slot}")]
    UnknownValue { slot: String, value: String },
    #[error("evidence probabilities sum to {sum}, above 1")]
    EvidenceAboveOne { sum: f64 },
    #[error("negative evidence probability {p}")]
    NegativeEvidence { p: f64 },
    #[error("slot index {index} out of range for {slots} slots")]
    SlotOutOfRange { index: usize, slots: usize },
}
