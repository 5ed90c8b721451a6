//! Small dense f64 kernels shared by the tape forward pass, the tape
//! backward pass, and the tape-free inference path. Keeping one set of
//! kernels means inference and recorded forward passes are bit-identical.

/// out = A @ B with A m×k, B k×n, all row-major. Overwrites `out`.
pub fn matmul(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..m {
        for p in 0..k {
            let a_ip = a[i * k + p];
            if a_ip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += a_ip * brow[j];
            }
        }
    }
}

/// y = A @ x with A m×k row-major, x length k. Overwrites `y`.
pub fn matvec(a: &[f64], x: &[f64], y: &mut [f64], m: usize, k: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(x.len(), k);
    debug_assert_eq!(y.len(), m);
    for i in 0..m {
        let row = &a[i * k..(i + 1) * k];
        let mut s = 0.0;
        for p in 0..k {
            s += row[p] * x[p];
        }
        y[i] = s;
    }
}

/// y += Aᵀ @ x with A m×k row-major, x length m, y length k.
pub fn matvec_t_acc(a: &[f64], x: &[f64], y: &mut [f64], m: usize, k: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(x.len(), m);
    debug_assert_eq!(y.len(), k);
    for i in 0..m {
        let xi = x[i];
        if xi == 0.0 {
            continue;
        }
        let row = &a[i * k..(i + 1) * k];
        for p in 0..k {
            y[p] += xi * row[p];
        }
    }
}

/// W += u ⊗ v (outer product accumulate), W m×n, u length m, v length n.
pub fn outer_acc(w: &mut [f64], u: &[f64], v: &[f64]) {
    let m = u.len();
    let n = v.len();
    debug_assert_eq!(w.len(), m * n);
    for i in 0..m {
        let ui = u[i];
        if ui == 0.0 {
            continue;
        }
        let row = &mut w[i * n..(i + 1) * n];
        for j in 0..n {
            row[j] += ui * v[j];
        }
    }
}

/// out += A @ B with A m×k, B k×n.
pub fn matmul_nn_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        for p in 0..k {
            let a_ip = a[i * k + p];
            if a_ip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += a_ip * brow[j];
            }
        }
    }
}

/// out += A @ Bᵀ with A m×k, B n×k (so Bᵀ is k×n), out m×n.
pub fn matmul_nt_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut s = 0.0;
            for p in 0..k {
                s += arow[p] * brow[p];
            }
            orow[j] += s;
        }
    }
}

/// out += Aᵀ @ B with A k×m, B k×n, out m×n.
pub fn matmul_tn_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let a_pi = arow[i];
            if a_pi == 0.0 {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += a_pi * brow[j];
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softmax with max subtraction. Overwrites `out`.
pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    debug_assert_eq!(logits.len(), out.len());
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(logits) {
        let e = (x - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let a = vec![1.0, 0.0, 0.0, 1.0];
        let b = vec![3.0, 4.0, 5.0, 6.0];
        let mut out = vec![0.0; 4];
        matmul(&a, &b, &mut out, 2, 2, 2);
        assert_eq!(out, b);
    }

    #[test]
    fn matvec_t_matches_transpose() {
        // A = [[1,2],[3,4]] (2x2); Aᵀx for x=[1,1] is [4,6]
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let mut y = vec![0.0; 2];
        matvec_t_acc(&a, &[1.0, 1.0], &mut y, 2, 2);
        assert_eq!(y, vec![4.0, 6.0]);
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut out = vec![0.0; 3];
        softmax_into(&[1.0, 2.0, 3.0], &mut out);
        let s: f64 = out.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
