//! Dense-tensor reverse-mode automatic differentiation with the layers and
//! optimizer the estimator needs: GRU sequences, attention scoring,
//! softmax/cross-entropy, embeddings, dropout, Adam.

pub mod adam;
pub mod container;
pub mod gradcheck;
pub mod gru;
pub mod init;
pub mod kernels;
pub mod ops;
pub mod tape;
pub mod tensor;

pub use adam::{adam_step, AdamState};
pub use ops::{bigru_sequence, cross_entropy_loss, gru_cell_forward, softmax};
pub use tape::{GruNodes, NodeId, Tape};
pub use tensor::{ParameterSet, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape error: {what}")]
    BadShape { what: String },
    #[error("duplicate parameter name {name}")]
    DuplicateParam { name: String },
    #[error("missing parameter {name}")]
    MissingParam { name: String },
    #[error("NaN input to {what}")]
    NanInput { what: String },
    #[error("class index {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },
    #[error("token id {id} out of vocabulary range {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("backward requires a scalar node, got {numel} elements")]
    BackwardNonScalar { numel: usize },
    #[error("corrupt container: {what}")]
    BadContainer { what: String },
    #[error("container version mismatch: expected {expected}, got {got}")]
    VersionMismatch { expected: u32, got: u32 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
