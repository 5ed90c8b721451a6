//! Dialogue transcripts with per-system-turn quality labels: the data
//! model, newline-delimited JSON and table ingestion, deterministic
//! synthesis, fold construction, and vocabulary building.

mod folds;
mod io;
mod synth;
mod vocab;

pub use folds::make_folds;
pub use io::{load_corpus_jsonl, load_corpus_table, save_corpus_jsonl, ColumnMapping};
pub use synth::{synthesize_corpus, SynthConfig};
pub use vocab::{build_vocab, tokenize, Vocab, SEPARATOR_TOKEN};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("row {row}: missing column {column}")]
    MissingColumn { row: usize, column: String },
    #[error("row {row}: label {value:?} is not an integer in 1..=5")]
    BadLabel { row: usize, value: String },
    #[error("dialogue {dialogue_id}: {what}")]
    BadDialogue { dialogue_id: String, what: String },
    #[error("empty corpus")]
    Empty,
    #[error("{dialogues} dialogues cannot fill {folds} folds")]
    TooFewDialogues { dialogues: usize, folds: usize },
    #[error("csv error at row {row}: {source}")]
    Csv { row: usize, source: csv::Error },
}

/// One exchange: the system utterance and the user reply that follows it.
/// Quality labels attach to system turns and, when present, lie in 1..=5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedTurn {
    pub turn_index: usize,
    pub system_text: String,
    pub user_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iq: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedDialogue {
    pub dialogue_id: String,
    pub turns: Vec<AnnotatedTurn>,
}

impl AnnotatedDialogue {
    /// Nonempty, contiguous 0-based turn indices, labels in range.
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.turns.is_empty() {
            return Err(CorpusError::BadDialogue {
                dialogue_id: self.dialogue_id.clone(),
                what: "no turns".into(),
            });
        }
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.turn_index != i {
                return Err(CorpusError::BadDialogue {
                    dialogue_id: self.dialogue_id.clone(),
                    what: format!("turn_index {} at position {i}", turn.turn_index),
                });
            }
            if let Some(iq) = turn.iq {
                if !(1..=5).contains(&iq) {
                    return Err(CorpusError::BadDialogue {
                        dialogue_id: self.dialogue_id.clone(),
                        what: format!("turn {i}: label {iq} outside 1..=5"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn labeled_turns(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.turns.iter().filter_map(|t| t.iq.map(|iq| (t.turn_index, iq)))
    }
}

/// Deterministic quality trajectory over per-turn misunderstanding events.
///
/// The label of system turn t reflects everything before the turn's own
/// event: quality starts at 5, drops one point for a turn whose exchange
/// misunderstands, and recovers one point after three consecutive clean
/// turns, clamped to [1, 5]. Consecutive labels therefore differ by at
/// most one.
pub fn iq_label_sequence(events: &[bool]) -> Vec<u8> {
    let mut iq: i8 = 5;
    let mut streak = 0u32;
    let mut labels = Vec::with_capacity(events.len());
    for &event in events {
        labels.push(iq as u8);
        if event {
            iq = (iq - 1).max(1);
            streak = 0;
        } else {
            streak += 1;
            if streak == 3 {
                iq = (iq + 1).min(5);
                streak = 0;
            }
        }
    }
    labels
}
