//! The hierarchical turn-level quality estimator: a bidirectional GRU
//! with attention pooling per turn, a unidirectional GRU over turns, and
//! a five-class softmax head at every system turn.

mod model;
mod train;

pub use model::{embed_turn, IqModel, IqPrediction, TurnEncoding};
pub use train::{crossvalidate, evaluate, train, CvReport, EpochStats, EvalMetrics, TrainResult};

use serde::{Deserialize, Serialize};

pub const NUM_CLASSES: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum IqError {
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Metric(#[from] crate::metrics::MetricError),
    #[error("invalid config: {what}")]
    BadConfig { what: String },
    #[error("empty dialogue")]
    EmptyDialogue,
    #[error("dialogue {dialogue_id} turn {turn}: label {label} outside 1..=5")]
    BadLabel { dialogue_id: String, turn: usize, label: u8 },
    #[error("model file header does not match parameters: {what}")]
    HeaderMismatch { what: String },
    #[error("embedding file line {line}: {what}")]
    BadEmbeddingFile { line: usize, what: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Hyperparameters of the estimator. `vocab_size` is filled in when a
/// vocabulary is built or loaded.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IqModelConfig {
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub turn_hidden: usize,
    pub attention_dim: usize,
    pub dialogue_hidden: usize,
    pub num_classes: usize,
    pub max_context_turns: usize,
    pub dropout_rate: f64,
    pub attention_gamma: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_dialogues: usize,
    pub seed: u64,
    /// Stop training once the training-set UAR reaches this value.
    #[serde(default)]
    pub early_stop_uar: Option<f64>,
}

impl Default for IqModelConfig {
    fn default() -> Self {
        IqModelConfig {
            vocab_size: 0,
            embedding_dim: 32,
            turn_hidden: 64,
            attention_dim: 64,
            dialogue_hidden: 64,
            num_classes: NUM_CLASSES,
            max_context_turns: 100,
            dropout_rate: 0.5,
            attention_gamma: 1.0,
            lr: 1e-3,
            epochs: 30,
            batch_dialogues: 8,
            seed: 0,
            early_stop_uar: None,
        }
    }
}

impl IqModelConfig {
    pub fn validate(&self) -> Result<(), IqError> {
        let positive = [
            ("embedding_dim", self.embedding_dim),
            ("turn_hidden", self.turn_hidden),
            ("attention_dim", self.attention_dim),
            ("dialogue_hidden", self.dialogue_hidden),
            ("max_context_turns", self.max_context_turns),
            ("batch_dialogues", self.batch_dialogues),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(IqError::BadConfig { what: format!("{name} must be positive") });
            }
        }
        if self.num_classes != NUM_CLASSES {
            return Err(IqError::BadConfig {
                what: format!("num_classes must be {NUM_CLASSES}, got {}", self.num_classes),
            });
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(IqError::BadConfig {
                what: format!("dropout_rate {} outside [0, 1)", self.dropout_rate),
            });
        }
        Ok(())
    }
}
