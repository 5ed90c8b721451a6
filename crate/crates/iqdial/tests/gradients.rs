//! Finite-difference verification for every tape operation: analytic
//! gradients from `Tape::backward` against central differences of an
//! independently re-evaluated forward pass.

use indexmap::IndexMap;
use iqdial::nn::gradcheck::finite_difference_check;
use iqdial::nn::tape::{GruNodes, Tape};
use iqdial::nn::{init, ParameterSet};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

const TOL: f64 = 1e-4;
const STEP: f64 = 1e-5;

/// Runs a loss builder twice: once for analytic gradients, then under
/// finite differences of its pure value.
fn check<F>(ps: &ParameterSet, build: F) -> f64
where
    F: Fn(&ParameterSet, &mut Tape) -> iqdial::nn::NodeId,
{
    let mut tape = Tape::new();
    let loss = build(ps, &mut tape);
    tape.backward(loss).unwrap();
    let mut work = ps.clone();
    work.zero_grads();
    tape.export_grads(&mut work).unwrap();
    let analytic: IndexMap<String, Vec<f64>> = work
        .iter()
        .map(|(n, t)| (n.clone(), t.grad.clone().unwrap_or_else(|| vec![0.0; t.numel()])))
        .collect();

    let report = finite_difference_check(
        ps,
        &analytic,
        |p| {
            let mut t = Tape::new();
            let l = build(p, &mut t);
            t.value(l)[0]
        },
        STEP,
    );
    assert!(
        report.passes(TOL),
        "max rel err {} at {} ({} coords checked)",
        report.max_rel_err,
        report.worst,
        report.checked
    );
    report.max_rel_err
}

fn params_with(names: &[(&str, usize, usize)], seed: u64) -> ParameterSet {
    let mut ps = ParameterSet::new(seed);
    let mut rng = ps.seeded_rng();
    for (name, r, c) in names {
        if *c == 1 {
            init::vector(&mut ps, name, *r, &mut rng).unwrap();
        } else {
            init::matrix(&mut ps, name, *r, *c, &mut rng).unwrap();
        }
    }
    // nudge away from the tiny init so gradients are not degenerate
    for (_, t) in ps.iter_mut() {
        for v in t.data_mut() {
            *v *= 10.0;
        }
    }
    ps
}

#[test]
fn matmul_add_hadamard_activations() {
    let ps = params_with(&[("a", 3, 4), ("b", 4, 2), ("c", 3, 2), ("d", 3, 2)], 11);
    check(&ps, |p, t| {
        let a = t.param("a", p.get("a").unwrap());
        let b = t.param("b", p.get("b").unwrap());
        let c = t.param("c", p.get("c").unwrap());
        let d = t.param("d", p.get("d").unwrap());
        let mm = t.matmul(a, b).unwrap();
        let sum = t.add(mm, c).unwrap();
        let sig = t.sigmoid(sum);
        let tan = t.tanh(d);
        let had = t.hadamard(sig, tan).unwrap();
        let aff = t.affine(had, -1.5, 0.25);
        t.sum_all(aff)
    });
}

#[test]
fn concat_slice_reverse() {
    let ps = params_with(&[("x", 3, 2), ("y", 2, 2)], 12);
    check(&ps, |p, t| {
        let x = t.param("x", p.get("x").unwrap());
        let y = t.param("y", p.get("y").unwrap());
        let stacked = t.concat_rows(&[x, y]).unwrap();
        let rev = t.reverse_rows(stacked);
        let side = t.concat_cols(stacked, rev).unwrap();
        let cut = t.rows_slice(side, 1, 3).unwrap();
        let sq = t.hadamard(cut, cut).unwrap();
        t.sum_all(sq)
    });
}

#[test]
fn softmax_weighted_pool() {
    let ps = params_with(&[("scores", 4, 1), ("h", 4, 3)], 13);
    check(&ps, |p, t| {
        let s = t.param("scores", p.get("scores").unwrap());
        let h = t.param("h", p.get("h").unwrap());
        let alpha = t.softmax(s).unwrap();
        // pooled = alphaᵀ @ h : (4×1)ᵀ @ 4×3
        let pooled = t.matmul_t(alpha, h).unwrap();
        let sq = t.hadamard(pooled, pooled).unwrap();
        t.sum_all(sq)
    });
}

#[test]
fn fused_softmax_cross_entropy() {
    let ps = params_with(&[("logits", 5, 1)], 14);
    check(&ps, |p, t| {
        let l = t.param("logits", p.get("logits").unwrap());
        t.softmax_cross_entropy(l, 2).unwrap()
    });
}

#[test]
fn embedding_gather() {
    let ps = params_with(&[("emb", 5, 3)], 15);
    check(&ps, |p, t| {
        let e = t.param("emb", p.get("emb").unwrap());
        let rows = t.embed_rows(e, &[0, 2, 2, 4]).unwrap();
        let sq = t.hadamard(rows, rows).unwrap();
        t.sum_all(sq)
    });
}

#[test]
fn dropout_fixed_mask() {
    let ps = params_with(&[("x", 4, 2)], 16);
    check(&ps, |p, t| {
        let x = t.param("x", p.get("x").unwrap());
        // same seed per evaluation keeps the mask constant across the
        // central-difference probes
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let dropped = t.dropout(x, 0.5, &mut rng);
        let sq = t.hadamard(dropped, dropped).unwrap();
        t.sum_all(sq)
    });
}

#[test]
fn gru_sequence_full_bptt() {
    let names = [
        ("x", 4, 3),
        ("g_wz", 3, 3), ("g_uz", 3, 3), ("g_bz", 3, 1),
        ("g_wr", 3, 3), ("g_ur", 3, 3), ("g_br", 3, 1),
        ("g_wh", 3, 3), ("g_uh", 3, 3), ("g_bh", 3, 1),
    ];
    let ps = params_with(&names, 17);
    check(&ps, |p, t| {
        let x = t.param("x", p.get("x").unwrap());
        let g = GruNodes {
            wz: t.param("g_wz", p.get("g_wz").unwrap()),
            uz: t.param("g_uz", p.get("g_uz").unwrap()),
            bz: t.param("g_bz", p.get("g_bz").unwrap()),
            wr: t.param("g_wr", p.get("g_wr").unwrap()),
            ur: t.param("g_ur", p.get("g_ur").unwrap()),
            br: t.param("g_br", p.get("g_br").unwrap()),
            wh: t.param("g_wh", p.get("g_wh").unwrap()),
            uh: t.param("g_uh", p.get("g_uh").unwrap()),
            bh: t.param("g_bh", p.get("g_bh").unwrap()),
        };
        let h = t.gru_seq(x, g).unwrap();
        let sq = t.hadamard(h, h).unwrap();
        t.sum_all(sq)
    });
}

#[test]
fn attention_scoring() {
    let ps = params_with(&[("h", 4, 6), ("w", 3, 6), ("b", 3, 1), ("v", 3, 1)], 18);
    check(&ps, |p, t| {
        let h = t.param("h", p.get("h").unwrap());
        let w = t.param("w", p.get("w").unwrap());
        let b = t.param("b", p.get("b").unwrap());
        let v = t.param("v", p.get("v").unwrap());
        let scores = t.attn_score(h, w, b, v, 1.0).unwrap();
        let alpha = t.softmax(scores).unwrap();
        let pooled = t.matmul_t(alpha, h).unwrap();
        let sq = t.hadamard(pooled, pooled).unwrap();
        t.sum_all(sq)
    });
}
