//! Tape-free reference operations on plain slices: the stable softmax,
//! cross-entropy, a GRU cell addressed through named parameters, and the
//! bidirectional sequence encoder. These are the building blocks the
//! inference path uses directly.

use super::gru::{self, GruParams};
use super::kernels::softmax_into;
use super::tensor::ParameterSet;
use super::NnError;

/// Stable softmax. Rejects NaN inputs.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>, NnError> {
    if logits.is_empty() {
        return Err(NnError::BadShape { what: "softmax of empty vector".into() });
    }
    if logits.iter().any(|v| v.is_nan()) {
        return Err(NnError::NanInput { what: "softmax".into() });
    }
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    Ok(out)
}

/// −ln p[class], with the probability clamped at 1e-12.
pub fn cross_entropy_loss(probs: &[f64], class: usize) -> Result<f64, NnError> {
    if class >= probs.len() {
        return Err(NnError::ClassOutOfRange { class, classes: probs.len() });
    }
    Ok(-probs[class].max(1e-12).ln())
}

/// Resolves the nine gate parameters `{prefix}_wz ... {prefix}_bh` and
/// checks their shapes against (input_dim, hidden_dim).
pub fn gru_params<'a>(
    ps: &'a ParameterSet,
    prefix: &str,
    input_dim: usize,
    hidden_dim: usize,
) -> Result<GruParams<'a>, NnError> {
    let get = |suffix: &str, rows: usize, cols: usize| -> Result<&'a [f64], NnError> {
        let name = format!("{prefix}_{suffix}");
        let t = ps.get(&name)?;
        let expect = rows * cols;
        if t.numel() != expect {
            return Err(NnError::BadShape {
                what: format!("parameter {name}: expected {rows}x{cols}, got {:?}", t.shape()),
            });
        }
        Ok(t.data())
    };
    Ok(GruParams {
        wz: get("wz", hidden_dim, input_dim)?,
        uz: get("uz", hidden_dim, hidden_dim)?,
        bz: get("bz", hidden_dim, 1)?,
        wr: get("wr", hidden_dim, input_dim)?,
        ur: get("ur", hidden_dim, hidden_dim)?,
        br: get("br", hidden_dim, 1)?,
        wh: get("wh", hidden_dim, input_dim)?,
        uh: get("uh", hidden_dim, hidden_dim)?,
        bh: get("bh", hidden_dim, 1)?,
        input_dim,
        hidden_dim,
    })
}

/// One GRU step through named parameters under `prefix`.
pub fn gru_cell_forward(
    x: &[f64],
    h_prev: &[f64],
    ps: &ParameterSet,
    prefix: &str,
) -> Result<Vec<f64>, NnError> {
    let u = h_prev.len();
    let p = gru_params(ps, prefix, x.len(), u)?;
    let mut h = vec![0.0; u];
    let (mut z, mut r, mut hc) = (vec![0.0; u], vec![0.0; u], vec![0.0; u]);
    gru::cell_forward(x, h_prev, p, &mut h, &mut z, &mut r, &mut hc);
    Ok(h)
}

/// Bidirectional GRU over a token sequence. Output k is the concatenation
/// of the forward state after inputs 0..=k and the backward state after
/// inputs K-1..=k. Forward parameters live under `fwd_prefix`, backward
/// under `bwd_prefix`.
pub fn bigru_sequence(
    inputs: &[Vec<f64>],
    ps: &ParameterSet,
    fwd_prefix: &str,
    bwd_prefix: &str,
    hidden_dim: usize,
) -> Result<Vec<Vec<f64>>, NnError> {
    if inputs.is_empty() {
        return Err(NnError::EmptySequence);
    }
    let d = inputs[0].len();
    let k = inputs.len();
    let fwd = gru_params(ps, fwd_prefix, d, hidden_dim)?;
    let bwd = gru_params(ps, bwd_prefix, d, hidden_dim)?;

    let mut flat = Vec::with_capacity(k * d);
    for row in inputs {
        if row.len() != d {
            return Err(NnError::BadShape {
                what: format!("ragged sequence: {} vs {d}", row.len()),
            });
        }
        flat.extend_from_slice(row);
    }
    let mut rev = Vec::with_capacity(k * d);
    for row in inputs.iter().rev() {
        rev.extend_from_slice(row);
    }

    let u = hidden_dim;
    let mut hf = vec![0.0; k * u];
    let mut hb = vec![0.0; k * u];
    let mut scratch = vec![0.0; k * u];
    let (mut s2, mut s3) = (vec![0.0; k * u], vec![0.0; k * u]);
    gru::seq_forward(&flat, k, fwd, &mut hf, &mut scratch, &mut s2, &mut s3);
    gru::seq_forward(&rev, k, bwd, &mut hb, &mut scratch, &mut s2, &mut s3);

    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let mut row = Vec::with_capacity(2 * u);
        row.extend_from_slice(&hf[i * u..(i + 1) * u]);
        // backward state for position i sits at reversed index k-1-i
        row.extend_from_slice(&hb[(k - 1 - i) * u..(k - i) * u]);
        out.push(row);
    }
    Ok(out)
}
