//! Parameter initialization: weights uniform in (−0.08, 0.08) from the
//! model's seeded stream, biases zero.

use rand_chacha::ChaCha20Rng;

use super::tensor::{ParameterSet, Tensor};
use super::NnError;

pub const INIT_BOUND: f64 = 0.08;

pub fn matrix(
    ps: &mut ParameterSet,
    name: &str,
    rows: usize,
    cols: usize,
    rng: &mut ChaCha20Rng,
) -> Result<(), NnError> {
    ps.insert(name, Tensor::uniform(vec![rows, cols], INIT_BOUND, rng))
}

pub fn vector(
    ps: &mut ParameterSet,
    name: &str,
    len: usize,
    rng: &mut ChaCha20Rng,
) -> Result<(), NnError> {
    ps.insert(name, Tensor::uniform(vec![len], INIT_BOUND, rng))
}

pub fn zeros(ps: &mut ParameterSet, name: &str, len: usize) -> Result<(), NnError> {
    ps.insert(name, Tensor::zeros(vec![len]))
}

/// The nine buffers of one GRU under `{prefix}_*`.
pub fn gru(
    ps: &mut ParameterSet,
    prefix: &str,
    input_dim: usize,
    hidden_dim: usize,
    rng: &mut ChaCha20Rng,
) -> Result<(), NnError> {
    for gate in ["z", "r", "h"] {
        matrix(ps, &format!("{prefix}_w{gate}"), hidden_dim, input_dim, rng)?;
        matrix(ps, &format!("{prefix}_u{gate}"), hidden_dim, hidden_dim, rng)?;
        zeros(ps, &format!("{prefix}_b{gate}"), hidden_dim)?;
    }
    Ok(())
}
