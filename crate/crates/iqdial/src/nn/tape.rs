//! Reverse-mode automatic differentiation over a recorded operation tape.
//!
//! Forward builders execute eagerly into an arena of f64 buffers and record
//! one op per call; `backward` replays the tape in reverse, accumulating
//! vector-Jacobian products. Recurrent sequences and attention scoring are
//! recorded as single fused ops so a dialogue costs a few dozen tape entries
//! rather than tens of thousands.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::gru::{self, GruGrads, GruParams};
use super::kernels::{
    matmul, matmul_nn_acc, matmul_nt_acc, matmul_tn_acc, matvec_t_acc, outer_acc, softmax_into,
};
use super::tensor::{ParameterSet, Tensor};
use super::NnError;

pub type NodeId = usize;

struct Buf {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

/// The nine parameter nodes of one GRU, gate order z, r, candidate.
#[derive(Clone, Copy, Debug)]
pub struct GruNodes {
    pub wz: NodeId,
    pub uz: NodeId,
    pub bz: NodeId,
    pub wr: NodeId,
    pub ur: NodeId,
    pub br: NodeId,
    pub wh: NodeId,
    pub uh: NodeId,
    pub bh: NodeId,
}

enum Op {
    MatMul { a: NodeId, b: NodeId, out: NodeId, m: usize, k: usize, n: usize },
    MatMulT { a: NodeId, b: NodeId, out: NodeId, m: usize, k: usize, n: usize },
    Add { a: NodeId, b: NodeId, out: NodeId },
    Hadamard { a: NodeId, b: NodeId, out: NodeId },
    Sigmoid { x: NodeId, out: NodeId },
    Tanh { x: NodeId, out: NodeId },
    Affine { x: NodeId, out: NodeId, mul: f64, add: f64 },
    ConcatRows { inputs: Vec<NodeId>, out: NodeId },
    ConcatCols { a: NodeId, b: NodeId, out: NodeId },
    RowsSlice { x: NodeId, out: NodeId, start: usize },
    ReverseRows { x: NodeId, out: NodeId },
    Softmax { x: NodeId, out: NodeId },
    SoftmaxCrossEntropy { logits: NodeId, probs: NodeId, out: NodeId, class: usize },
    EmbedRows { table: NodeId, out: NodeId, ids: Vec<usize> },
    Dropout { x: NodeId, mask: NodeId, out: NodeId },
    SumAll { x: NodeId, out: NodeId },
    GruSeq {
        x: NodeId,
        out: NodeId,
        z: NodeId,
        r: NodeId,
        hc: NodeId,
        p: GruNodes,
        input_dim: usize,
        hidden_dim: usize,
    },
    AttnScore {
        h: NodeId,
        w: NodeId,
        b: NodeId,
        v: NodeId,
        t_saved: NodeId,
        out: NodeId,
        gamma: f64,
    },
}

#[derive(Default)]
pub struct Tape {
    bufs: Vec<Buf>,
    grads: Vec<Option<Vec<f64>>>,
    ops: Vec<Op>,
    param_nodes: Vec<(String, NodeId)>,
    param_cache: HashMap<String, NodeId>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn alloc(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> NodeId {
        debug_assert_eq!(data.len(), rows * cols);
        self.bufs.push(Buf { data, rows, cols });
        self.grads.push(None);
        self.bufs.len() - 1
    }

    /// Leaf node holding constant input data (rows×cols, row-major).
    pub fn leaf(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> NodeId {
        self.alloc(rows, cols, data)
    }

    /// Registers a named parameter, snapshotting its current values. The
    /// same name returns the same node, so repeated use within one tape
    /// accumulates gradients on a single buffer.
    pub fn param(&mut self, name: &str, t: &Tensor) -> NodeId {
        if let Some(&id) = self.param_cache.get(name) {
            return id;
        }
        let (rows, cols) = match t.shape() {
            [r, c] => (*r, *c),
            [n] => (*n, 1),
            s => panic!("parameter {name} has unsupported rank {}", s.len()),
        };
        let id = self.alloc(rows, cols, t.data().to_vec());
        self.param_nodes.push((name.to_string(), id));
        self.param_cache.insert(name.to_string(), id);
        id
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.bufs[id].data
    }

    pub fn dims(&self, id: NodeId) -> (usize, usize) {
        (self.bufs[id].rows, self.bufs[id].cols)
    }

    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.grads[id].as_deref()
    }

    // ---- builders ------------------------------------------------------

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (m, k1) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k1 != k2 {
            return Err(NnError::BadShape {
                what: format!("matmul {m}x{k1} @ {k2}x{n}"),
            });
        }
        let mut out = vec![0.0; m * n];
        matmul(&self.bufs[a].data, &self.bufs[b].data, &mut out, m, k1, n);
        let id = self.alloc(m, n, out);
        self.ops.push(Op::MatMul { a, b, out: id, m, k: k1, n });
        Ok(id)
    }

    /// out = Aᵀ @ B for A k×m, B k×n. Saves materializing transposes when
    /// pooling attention weights against hidden states.
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (k1, m) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k1 != k2 {
            return Err(NnError::BadShape {
                what: format!("matmul_t ({k1}x{m})ᵀ @ {k2}x{n}"),
            });
        }
        let mut out = vec![0.0; m * n];
        matmul_tn_acc(&self.bufs[a].data, &self.bufs[b].data, &mut out, m, k1, n);
        let id = self.alloc(m, n, out);
        self.ops.push(Op::MatMulT { a, b, out: id, m, k: k1, n });
        Ok(id)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        if self.dims(a) != self.dims(b) {
            return Err(NnError::BadShape {
                what: format!("add {:?} + {:?}", self.dims(a), self.dims(b)),
            });
        }
        let (r, c) = self.dims(a);
        let data: Vec<f64> = self.bufs[a]
            .data
            .iter()
            .zip(&self.bufs[b].data)
            .map(|(x, y)| x + y)
            .collect();
        let id = self.alloc(r, c, data);
        self.ops.push(Op::Add { a, b, out: id });
        Ok(id)
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        if self.dims(a) != self.dims(b) {
            return Err(NnError::BadShape {
                what: format!("hadamard {:?} * {:?}", self.dims(a), self.dims(b)),
            });
        }
        let (r, c) = self.dims(a);
        let data: Vec<f64> = self.bufs[a]
            .data
            .iter()
            .zip(&self.bufs[b].data)
            .map(|(x, y)| x * y)
            .collect();
        let id = self.alloc(r, c, data);
        self.ops.push(Op::Hadamard { a, b, out: id });
        Ok(id)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let (r, c) = self.dims(x);
        let data: Vec<f64> = self.bufs[x].data.iter().map(|&v| super::kernels::sigmoid(v)).collect();
        let id = self.alloc(r, c, data);
        self.ops.push(Op::Sigmoid { x, out: id });
        id
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let (r, c) = self.dims(x);
        let data: Vec<f64> = self.bufs[x].data.iter().map(|v| v.tanh()).collect();
        let id = self.alloc(r, c, data);
        self.ops.push(Op::Tanh { x, out: id });
        id
    }

    /// out = mul·x + add, elementwise.
    pub fn affine(&mut self, x: NodeId, mul: f64, add: f64) -> NodeId {
        let (r, c) = self.dims(x);
        let data: Vec<f64> = self.bufs[x].data.iter().map(|v| mul * v + add).collect();
        let id = self.alloc(r, c, data);
        self.ops.push(Op::Affine { x, out: id, mul, add });
        id
    }

    /// Stacks inputs along rows; all must share a column count.
    pub fn concat_rows(&mut self, inputs: &[NodeId]) -> Result<NodeId, NnError> {
        if inputs.is_empty() {
            return Err(NnError::BadShape { what: "concat_rows of nothing".into() });
        }
        let cols = self.bufs[inputs[0]].cols;
        let mut rows = 0;
        let mut data = Vec::new();
        for &id in inputs {
            if self.bufs[id].cols != cols {
                return Err(NnError::BadShape {
                    what: format!("concat_rows column mismatch {} vs {cols}", self.bufs[id].cols),
                });
            }
            rows += self.bufs[id].rows;
            data.extend_from_slice(&self.bufs[id].data);
        }
        let id = self.alloc(rows, cols, data);
        self.ops.push(Op::ConcatRows { inputs: inputs.to_vec(), out: id });
        Ok(id)
    }

    /// Concatenates two equal-height matrices side by side.
    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (ra, ca) = self.dims(a);
        let (rb, cb) = self.dims(b);
        if ra != rb {
            return Err(NnError::BadShape { what: format!("concat_cols rows {ra} vs {rb}") });
        }
        let mut data = Vec::with_capacity(ra * (ca + cb));
        for i in 0..ra {
            data.extend_from_slice(&self.bufs[a].data[i * ca..(i + 1) * ca]);
            data.extend_from_slice(&self.bufs[b].data[i * cb..(i + 1) * cb]);
        }
        let id = self.alloc(ra, ca + cb, data);
        self.ops.push(Op::ConcatCols { a, b, out: id });
        Ok(id)
    }

    /// Copies a contiguous block of rows.
    pub fn rows_slice(&mut self, x: NodeId, start: usize, rows: usize) -> Result<NodeId, NnError> {
        let (r, c) = self.dims(x);
        if start + rows > r {
            return Err(NnError::BadShape {
                what: format!("rows_slice {start}..{} of {r} rows", start + rows),
            });
        }
        let data = self.bufs[x].data[start * c..(start + rows) * c].to_vec();
        let id = self.alloc(rows, c, data);
        self.ops.push(Op::RowsSlice { x, out: id, start });
        Ok(id)
    }

    pub fn reverse_rows(&mut self, x: NodeId) -> NodeId {
        let (r, c) = self.dims(x);
        let mut data = Vec::with_capacity(r * c);
        for i in (0..r).rev() {
            data.extend_from_slice(&self.bufs[x].data[i * c..(i + 1) * c]);
        }
        let id = self.alloc(r, c, data);
        self.ops.push(Op::ReverseRows { x, out: id });
        id
    }

    /// Softmax over all entries (used on K×1 attention scores).
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId, NnError> {
        if self.bufs[x].data.iter().any(|v| v.is_nan()) {
            return Err(NnError::NanInput { what: "softmax".into() });
        }
        let (r, c) = self.dims(x);
        let mut out = vec![0.0; r * c];
        softmax_into(&self.bufs[x].data, &mut out);
        let id = self.alloc(r, c, out);
        self.ops.push(Op::Softmax { x, out: id });
        Ok(id)
    }

    /// Fused softmax + cross-entropy producing a scalar loss node.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, class: usize) -> Result<NodeId, NnError> {
        let n = self.bufs[logits].data.len();
        if class >= n {
            return Err(NnError::ClassOutOfRange { class, classes: n });
        }
        let mut probs = vec![0.0; n];
        softmax_into(&self.bufs[logits].data, &mut probs);
        let loss = -probs[class].max(1e-12).ln();
        let probs_id = self.alloc(n, 1, probs);
        let id = self.alloc(1, 1, vec![loss]);
        self.ops.push(Op::SoftmaxCrossEntropy { logits, probs: probs_id, out: id, class });
        Ok(id)
    }

    /// Gathers rows of an embedding table (V×d) by token id.
    pub fn embed_rows(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId, NnError> {
        let (v, d) = self.dims(table);
        let mut data = Vec::with_capacity(ids.len() * d);
        for &t in ids {
            if t >= v {
                return Err(NnError::TokenOutOfRange { id: t, vocab: v });
            }
            data.extend_from_slice(&self.bufs[table].data[t * d..(t + 1) * d]);
        }
        let id = self.alloc(ids.len(), d, data);
        self.ops.push(Op::EmbedRows { table, out: id, ids: ids.to_vec() });
        Ok(id)
    }

    /// Inverted dropout: keeps entries with probability 1−rate, scaling
    /// survivors by 1/(1−rate). Identity when rate is 0.
    pub fn dropout(&mut self, x: NodeId, rate: f64, rng: &mut ChaCha20Rng) -> NodeId {
        if rate <= 0.0 {
            return x;
        }
        let (r, c) = self.dims(x);
        let keep = 1.0 - rate;
        let mask: Vec<f64> = (0..r * c)
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let data: Vec<f64> = self.bufs[x].data.iter().zip(&mask).map(|(v, m)| v * m).collect();
        let mask_id = self.alloc(r, c, mask);
        let id = self.alloc(r, c, data);
        self.ops.push(Op::Dropout { x, mask: mask_id, out: id });
        id
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.bufs[x].data.iter().sum();
        let id = self.alloc(1, 1, vec![s]);
        self.ops.push(Op::SumAll { x, out: id });
        id
    }

    fn gru_params_view(&self, p: GruNodes, input_dim: usize, hidden_dim: usize) -> GruParams<'_> {
        GruParams {
            wz: &self.bufs[p.wz].data,
            uz: &self.bufs[p.uz].data,
            bz: &self.bufs[p.bz].data,
            wr: &self.bufs[p.wr].data,
            ur: &self.bufs[p.ur].data,
            br: &self.bufs[p.br].data,
            wh: &self.bufs[p.wh].data,
            uh: &self.bufs[p.uh].data,
            bh: &self.bufs[p.bh].data,
            input_dim,
            hidden_dim,
        }
    }

    /// Runs a GRU over the rows of `x` from a zero initial state and
    /// records the whole sequence as one op. Output is steps×u.
    pub fn gru_seq(&mut self, x: NodeId, p: GruNodes) -> Result<NodeId, NnError> {
        let (steps, d) = self.dims(x);
        let (u, d_w) = self.dims(p.wz);
        if d_w != d {
            return Err(NnError::BadShape {
                what: format!("gru input dim {d} but weight expects {d_w}"),
            });
        }
        let mut h = vec![0.0; steps * u];
        let mut z = vec![0.0; steps * u];
        let mut r = vec![0.0; steps * u];
        let mut hc = vec![0.0; steps * u];
        {
            let view = self.gru_params_view(p, d, u);
            let x_data = &self.bufs[x].data;
            gru::seq_forward(x_data, steps, view, &mut h, &mut z, &mut r, &mut hc);
        }
        let z_id = self.alloc(steps, u, z);
        let r_id = self.alloc(steps, u, r);
        let hc_id = self.alloc(steps, u, hc);
        let out = self.alloc(steps, u, h);
        self.ops.push(Op::GruSeq { x, out, z: z_id, r: r_id, hc: hc_id, p, input_dim: d, hidden_dim: u });
        Ok(out)
    }

    /// Per-row attention scores s_k = γ·vᵀtanh(W·h_k + b) for h K×(2u),
    /// W att×(2u), b att×1, v att×1. Output is K×1.
    pub fn attn_score(
        &mut self,
        h: NodeId,
        w: NodeId,
        b: NodeId,
        v: NodeId,
        gamma: f64,
    ) -> Result<NodeId, NnError> {
        let (k_rows, hdim) = self.dims(h);
        let (att, wdim) = self.dims(w);
        if wdim != hdim || self.bufs[b].data.len() != att || self.bufs[v].data.len() != att {
            return Err(NnError::BadShape {
                what: format!("attention dims h:{hdim} w:{att}x{wdim}"),
            });
        }
        let mut t_saved = vec![0.0; k_rows * att];
        let mut scores = vec![0.0; k_rows];
        {
            let wd = &self.bufs[w].data;
            let bd = &self.bufs[b].data;
            let vd = &self.bufs[v].data;
            let hd = &self.bufs[h].data;
            let mut pre = vec![0.0; att];
            for kk in 0..k_rows {
                super::kernels::matvec(wd, &hd[kk * hdim..(kk + 1) * hdim], &mut pre, att, hdim);
                let trow = &mut t_saved[kk * att..(kk + 1) * att];
                let mut s = 0.0;
                for i in 0..att {
                    let t = (pre[i] + bd[i]).tanh();
                    trow[i] = t;
                    s += vd[i] * t;
                }
                scores[kk] = gamma * s;
            }
        }
        let t_id = self.alloc(k_rows, att, t_saved);
        let out = self.alloc(k_rows, 1, scores);
        self.ops.push(Op::AttnScore { h, w, b, v, t_saved: t_id, out, gamma });
        Ok(out)
    }

    // ---- backward ------------------------------------------------------

    /// Replays the tape in reverse from a scalar node, filling gradients.
    pub fn backward(&mut self, node: NodeId) -> Result<(), NnError> {
        if self.bufs[node].data.len() != 1 {
            return Err(NnError::BackwardNonScalar { numel: self.bufs[node].data.len() });
        }
        self.grads[node] = Some(vec![1.0]);

        for idx in (0..self.ops.len()).rev() {
            // split-borrow: buffer data is read-only during backward
            let (ops, bufs, grads) = (&self.ops, &self.bufs, &mut self.grads);
            let op = &ops[idx];
            match op {
                Op::MatMul { a, b, out, m, k, n } => {
                    let Some(d_out) = grads[*out].clone() else { continue };
                    let (m, k, n) = (*m, *k, *n);
                    let b_data = &bufs[*b].data;
                    let a_data = &bufs[*a].data;
                    let ga = ensure(grads, *a, m * k);
                    matmul_nt_acc(&d_out, b_data, ga, m, n, k);
                    let gb = ensure(grads, *b, k * n);
                    matmul_tn_acc(a_data, &d_out, gb, k, m, n);
                }
                Op::MatMulT { a, b, out, m, k, n } => {
                    // out = Aᵀ@B with A k×m, B k×n:
                    //   dA += B @ dOutᵀ   (k×n @ n×m)
                    //   dB += A @ dOut    (k×m @ m×n)
                    let Some(d_out) = grads[*out].clone() else { continue };
                    let (m, k, n) = (*m, *k, *n);
                    let b_data = &bufs[*b].data;
                    let a_data = &bufs[*a].data;
                    let ga = ensure(grads, *a, k * m);
                    matmul_nt_acc(b_data, &d_out, ga, k, n, m);
                    let gb = ensure(grads, *b, k * n);
                    matmul_nn_acc(a_data, &d_out, gb, k, m, n);
                }
                Op::Add { a, b, out } => {
                    let Some(d_out) = grads[*out].clone() else { continue };
                    acc(ensure(grads, *a, d_out.len()), &d_out);
                    acc(ensure(grads, *b, d_out.len()), &d_out);
                }
                Op::Hadamard { a, b, out } => {
                    let Some(d_out) = grads[*out].clone() else { continue };
                    let bd = bufs[*b].data.clone();
                    let ad = bufs[*a].data.clone();
                    let ga = ensure(grads, *a, d_out.len());
                    for i in 0..d_out.len() {
                        ga[i] += d_out[i] * bd[i];
                    }
                    let gb = ensure(grads, *b, d_out.len());
                    for i in 0..d_out.len() {
                        gb[i] += d_out[i] * ad[i];
                    }
                }
                Op::Sigmoid { x, out } => {
                    let Some(d_out) = grads[*out].clone() else { continue };
                    let od = bufs[*out].data.clone();
                    let gx = ensure(grads, *x, d_out.len());
                    for i in 0..d_out.len() {
                        gx[i] += d_out[i] * od[i] * (1.0 - od[i]);
                    }
                }
                Op::Tanh { x, out } => {
                    let Some(d_out) = grads[*out].clone() else { continue };
                    let od = bufs[*out].data.clone();
                    let gx = ensure(grads, *x, d_out.len());
                    for i in 0..d_out.len() {
                        gx[i] += d_out[i] * (1.0 - od[i] * od[i]);
                    }
                }
                Op::Affine { x, out, mul, .. } => {
                    let Some(d_out) = grads[*out].clone() else { continue };
                    let mul = *mul;
                    let gx = ensure(grads, *x, d_out.len());
                    for i in 0..d_out.len() {
                        gx[i] += d_out[i] * mul;
                    }
                }
                Op::ConcatRows { inputs, out } => {
                    let Some(d_out) = grads[*out].clone() else { continue };
                    let mut offset = 0;
                    let inputs = inputs.clone();
                    for id in inputs {
                        let len = bufs[id].data.len();
                        acc(ensure(grads, id, len), &d_out[offset..offset + len]);
                        offset += len;
                    }
                }
                Op::ConcatCols { a, b, out } => {
                    let Some(d_out) = grads[*out].clone() else { continue };
                    let (r, ca) = (bufs[*a].rows, bufs[*a].cols);
                    let cb = bufs[*b].cols;
                    let ga = ensure(grads, *a, r * ca);
                    for i in 0..r {
                        for j in 0..ca {
                            ga[i * ca + j] += d_out[i * (ca + cb) + j];
                        }
                    }
                    let gb = ensure(grads, *b, r * cb);
                    for i in 0..r {
                        for j in 0..cb {
                            gb[i * cb + j] += d_out[i * (ca + cb) + ca + j];
                        }
                    }
                }
                Op::RowsSlice { x, out, start } => {
                    let Some(d_out) = grads[*out].clone() else { continue };
                    let c = bufs[*x].cols;
                    let len = bufs[*x].data.len();
                    let start = *start;
                    let gx = ensure(grads, *x, len);
                    acc(&mut gx[start * c..start * c + d_out.len()], &d_out);
                }
                Op::ReverseRows { x, out } => {
                    let Some(d_out) = grads[*out].clone() else { continue };
                    let (r, c) = (bufs[*x].rows, bufs[*x].cols);
                    let gx = ensure(grads, *x, r * c);
                    for i in 0..r {
                        let src = &d_out[(r - 1 - i) * c..(r - i) * c];
                        acc(&mut gx[i * c..(i + 1) * c], src);
                    }
                }
                Op::Softmax { x, out } => {
                    let Some(d_out) = grads[*out].clone() else { continue };
                    let y = bufs[*out].data.clone();
                    let dot: f64 = d_out.iter().zip(&y).map(|(d, yi)| d * yi).sum();
                    let gx = ensure(grads, *x, d_out.len());
                    for i in 0..d_out.len() {
                        gx[i] += y[i] * (d_out[i] - dot);
                    }
                }
                Op::SoftmaxCrossEntropy { logits, probs, out, class } => {
                    let Some(d_out) = grads[*out].clone() else { continue };
                    let scale = d_out[0];
                    let p = bufs[*probs].data.clone();
                    let class = *class;
                    let gx = ensure(grads, *logits, p.len());
                    for i in 0..p.len() {
                        let onehot = if i == class { 1.0 } else { 0.0 };
                        gx[i] += scale * (p[i] - onehot);
                    }
                }
                Op::EmbedRows { table, out, ids } => {
                    let Some(d_out) = grads[*out].clone() else { continue };
                    let d = bufs[*table].cols;
                    let len = bufs[*table].data.len();
                    let ids = ids.clone();
                    let gt = ensure(grads, *table, len);
                    for (row, &tok) in ids.iter().enumerate() {
                        acc(&mut gt[tok * d..(tok + 1) * d], &d_out[row * d..(row + 1) * d]);
                    }
                }
                Op::Dropout { x, mask, out } => {
                    let Some(d_out) = grads[*out].clone() else { continue };
                    let m = bufs[*mask].data.clone();
                    let gx = ensure(grads, *x, d_out.len());
                    for i in 0..d_out.len() {
                        gx[i] += d_out[i] * m[i];
                    }
                }
                Op::SumAll { x, out } => {
                    let Some(d_out) = grads[*out].clone() else { continue };
                    let scale = d_out[0];
                    let len = bufs[*x].data.len();
                    let gx = ensure(grads, *x, len);
                    for v in gx.iter_mut() {
                        *v += scale;
                    }
                }
                Op::GruSeq { x, out, z, r, hc, p, input_dim, hidden_dim } => {
                    let Some(d_h) = grads[*out].clone() else { continue };
                    let (steps, d, u) = (bufs[*x].rows, *input_dim, *hidden_dim);
                    let p = *p;
                    let (x_id, z_id, r_id, hc_id, out_id) = (*x, *z, *r, *hc, *out);

                    // pre-size every gradient buffer, then take disjoint views
                    for (node, len) in [
                        (x_id, steps * d),
                        (p.wz, u * d),
                        (p.uz, u * u),
                        (p.bz, u),
                        (p.wr, u * d),
                        (p.ur, u * u),
                        (p.br, u),
                        (p.wh, u * d),
                        (p.uh, u * u),
                        (p.bh, u),
                    ] {
                        ensure(grads, node, len);
                    }
                    let view = GruParams {
                        wz: &bufs[p.wz].data,
                        uz: &bufs[p.uz].data,
                        bz: &bufs[p.bz].data,
                        wr: &bufs[p.wr].data,
                        ur: &bufs[p.ur].data,
                        br: &bufs[p.br].data,
                        wh: &bufs[p.wh].data,
                        uh: &bufs[p.uh].data,
                        bh: &bufs[p.bh].data,
                        input_dim: d,
                        hidden_dim: u,
                    };
                    let mut d_x = vec![0.0; steps * d];
                    let mut gw = GruGradBufs::new(u, d);
                    gru::seq_backward(
                        &bufs[x_id].data,
                        steps,
                        view,
                        &bufs[out_id].data,
                        &bufs[z_id].data,
                        &bufs[r_id].data,
                        &bufs[hc_id].data,
                        &d_h,
                        &mut d_x,
                        &mut gw.as_grads(),
                    );
                    acc(grads[x_id].as_mut().unwrap(), &d_x);
                    for (node, buf) in [
                        (p.wz, &gw.wz),
                        (p.uz, &gw.uz),
                        (p.bz, &gw.bz),
                        (p.wr, &gw.wr),
                        (p.ur, &gw.ur),
                        (p.br, &gw.br),
                        (p.wh, &gw.wh),
                        (p.uh, &gw.uh),
                        (p.bh, &gw.bh),
                    ] {
                        acc(grads[node].as_mut().unwrap(), buf);
                    }
                }
                Op::AttnScore { h, w, b, v, t_saved, out, gamma } => {
                    let Some(d_s) = grads[*out].clone() else { continue };
                    let (k_rows, hdim) = (bufs[*h].rows, bufs[*h].cols);
                    let att = bufs[*w].rows;
                    let gamma = *gamma;
                    let t = bufs[*t_saved].data.clone();
                    let vd = bufs[*v].data.clone();
                    let wd = bufs[*w].data.clone();
                    let hd = bufs[*h].data.clone();

                    let mut gh = vec![0.0; k_rows * hdim];
                    let mut gw_ = vec![0.0; att * hdim];
                    let mut gb_ = vec![0.0; att];
                    let mut gv_ = vec![0.0; att];
                    let mut dpre = vec![0.0; att];
                    for kk in 0..k_rows {
                        let ds = d_s[kk];
                        if ds == 0.0 {
                            continue;
                        }
                        let trow = &t[kk * att..(kk + 1) * att];
                        let hrow = &hd[kk * hdim..(kk + 1) * hdim];
                        for i in 0..att {
                            gv_[i] += ds * gamma * trow[i];
                            dpre[i] = ds * gamma * vd[i] * (1.0 - trow[i] * trow[i]);
                            gb_[i] += dpre[i];
                        }
                        outer_acc(&mut gw_, &dpre, hrow);
                        matvec_t_acc(&wd, &dpre, &mut gh[kk * hdim..(kk + 1) * hdim], att, hdim);
                    }
                    acc(ensure(grads, *h, k_rows * hdim), &gh);
                    acc(ensure(grads, *w, att * hdim), &gw_);
                    acc(ensure(grads, *b, att), &gb_);
                    acc(ensure(grads, *v, att), &gv_);
                }
            }
        }
        Ok(())
    }

    /// Accumulates this tape's parameter gradients into the set's `grad`
    /// buffers. Callers zero grads between optimizer steps.
    pub fn export_grads(&self, ps: &mut ParameterSet) -> Result<(), NnError> {
        for (name, node) in &self.param_nodes {
            if let Some(g) = self.grads[*node].as_ref() {
                let t = ps.get_mut(name)?;
                let dst = t.grad_mut();
                for (d, s) in dst.iter_mut().zip(g) {
                    *d += s;
                }
            }
        }
        Ok(())
    }
}

fn ensure(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
    if grads[id].is_none() {
        grads[id] = Some(vec![0.0; len]);
    }
    grads[id].as_mut().unwrap()
}

fn acc(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

struct GruGradBufs {
    wz: Vec<f64>,
    uz: Vec<f64>,
    bz: Vec<f64>,
    wr: Vec<f64>,
    ur: Vec<f64>,
    br: Vec<f64>,
    wh: Vec<f64>,
    uh: Vec<f64>,
    bh: Vec<f64>,
}

impl GruGradBufs {
    fn new(u: usize, d: usize) -> Self {
        GruGradBufs {
            wz: vec![0.0; u * d],
            uz: vec![0.0; u * u],
            bz: vec![0.0; u],
            wr: vec![0.0; u * d],
            ur: vec![0.0; u * u],
            br: vec![0.0; u],
            wh: vec![0.0; u * d],
            uh: vec![0.0; u * u],
            bh: vec![0.0; u],
        }
    }

    fn as_grads(&mut self) -> GruGrads<'_> {
        GruGrads {
            wz: &mut self.wz,
            uz: &mut self.uz,
            bz: &mut self.bz,
            wr: &mut self.wr,
            ur: &mut self.ur,
            br: &mut self.br,
            wh: &mut self.wh,
            uh: &mut self.uh,
            bh: &mut self.bh,
        }
    }
}
