//! Gated recurrent unit kernels: single cell and full-sequence forward /
//! backward. The gate convention is
//!
//!   z = σ(Wz·x + Uz·h + bz)
//!   r = σ(Wr·x + Ur·h + br)
//!   ĥ = tanh(Wh·x + Uh·(r⊙h) + bh)
//!   h' = (1−z)⊙h + z⊙ĥ
//!
//! with the candidate gated by z. Sequences always start from h = 0.

use super::kernels::{matvec, matvec_t_acc, outer_acc, sigmoid};

/// Borrowed view of one GRU's nine parameter buffers.
#[derive(Clone, Copy)]
pub struct GruParams<'a> {
    pub wz: &'a [f64],
    pub uz: &'a [f64],
    pub bz: &'a [f64],
    pub wr: &'a [f64],
    pub ur: &'a [f64],
    pub br: &'a [f64],
    pub wh: &'a [f64],
    pub uh: &'a [f64],
    pub bh: &'a [f64],
    pub input_dim: usize,
    pub hidden_dim: usize,
}

/// Mutable view of the matching gradient buffers.
pub struct GruGrads<'a> {
    pub wz: &'a mut [f64],
    pub uz: &'a mut [f64],
    pub bz: &'a mut [f64],
    pub wr: &'a mut [f64],
    pub ur: &'a mut [f64],
    pub br: &'a mut [f64],
    pub wh: &'a mut [f64],
    pub uh: &'a mut [f64],
    pub bh: &'a mut [f64],
}

/// One GRU step. Writes h', and the gate activations used by backward.
#[allow(clippy::too_many_arguments)]
pub fn cell_forward(
    x: &[f64],
    h_prev: &[f64],
    p: GruParams,
    h_out: &mut [f64],
    z_out: &mut [f64],
    r_out: &mut [f64],
    hc_out: &mut [f64],
) {
    let u = p.hidden_dim;
    let d = p.input_dim;
    let mut tmp = vec![0.0; u];

    matvec(p.wz, x, z_out, u, d);
    matvec(p.uz, h_prev, &mut tmp, u, u);
    for i in 0..u {
        z_out[i] = sigmoid(z_out[i] + tmp[i] + p.bz[i]);
    }

    matvec(p.wr, x, r_out, u, d);
    matvec(p.ur, h_prev, &mut tmp, u, u);
    for i in 0..u {
        r_out[i] = sigmoid(r_out[i] + tmp[i] + p.br[i]);
    }

    let rh: Vec<f64> = r_out.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    matvec(p.wh, x, hc_out, u, d);
    matvec(p.uh, &rh, &mut tmp, u, u);
    for i in 0..u {
        hc_out[i] = (hc_out[i] + tmp[i] + p.bh[i]).tanh();
    }

    for i in 0..u {
        h_out[i] = (1.0 - z_out[i]) * h_prev[i] + z_out[i] * hc_out[i];
    }
}

/// Runs the GRU over `steps` rows of `x` (steps×d) starting from h = 0.
/// Fills `h` (steps×u) and the saved gate buffers (steps×u each).
pub fn seq_forward(
    x: &[f64],
    steps: usize,
    p: GruParams,
    h: &mut [f64],
    z: &mut [f64],
    r: &mut [f64],
    hc: &mut [f64],
) {
    let u = p.hidden_dim;
    let d = p.input_dim;
    let zero = vec![0.0; u];
    for t in 0..steps {
        let (head, tail) = h.split_at_mut(t * u);
        let h_prev: &[f64] = if t == 0 { &zero } else { &head[(t - 1) * u..] };
        cell_forward(
            &x[t * d..(t + 1) * d],
            h_prev,
            p,
            &mut tail[..u],
            &mut z[t * u..(t + 1) * u],
            &mut r[t * u..(t + 1) * u],
            &mut hc[t * u..(t + 1) * u],
        );
    }
}

/// Full BPTT for one recorded sequence. `d_h` carries the incoming gradient
/// for every hidden state row; `d_x` and the parameter gradients accumulate.
#[allow(clippy::too_many_arguments)]
pub fn seq_backward(
    x: &[f64],
    steps: usize,
    p: GruParams,
    h: &[f64],
    z: &[f64],
    r: &[f64],
    hc: &[f64],
    d_h: &[f64],
    d_x: &mut [f64],
    g: &mut GruGrads,
) {
    let u = p.hidden_dim;
    let d = p.input_dim;
    let zero = vec![0.0; u];
    let mut carry = vec![0.0; u];
    let mut dz = vec![0.0; u];
    let mut dhc_pre = vec![0.0; u];
    let mut dz_pre = vec![0.0; u];
    let mut dr_pre = vec![0.0; u];
    let mut dr = vec![0.0; u];
    let mut uh_t = vec![0.0; u];
    let mut rh = vec![0.0; u];

    for t in (0..steps).rev() {
        let h_prev: &[f64] = if t == 0 { &zero } else { &h[(t - 1) * u..t * u] };
        let zt = &z[t * u..(t + 1) * u];
        let rt = &r[t * u..(t + 1) * u];
        let hct = &hc[t * u..(t + 1) * u];
        let xt = &x[t * d..(t + 1) * d];

        // total gradient reaching h_t: direct consumers plus the next step
        let mut dht = vec![0.0; u];
        for i in 0..u {
            dht[i] = d_h[t * u + i] + carry[i];
        }

        for i in 0..u {
            dz[i] = dht[i] * (hct[i] - h_prev[i]);
            let dhc = dht[i] * zt[i];
            dhc_pre[i] = dhc * (1.0 - hct[i] * hct[i]);
            carry[i] = dht[i] * (1.0 - zt[i]); // becomes d_h_prev
        }

        // candidate path
        for i in 0..u {
            rh[i] = rt[i] * h_prev[i];
        }
        outer_acc(g.wh, &dhc_pre, xt);
        outer_acc(g.uh, &dhc_pre, &rh);
        for i in 0..u {
            g.bh[i] += dhc_pre[i];
        }
        uh_t.iter_mut().for_each(|v| *v = 0.0);
        matvec_t_acc(p.uh, &dhc_pre, &mut uh_t, u, u);
        for i in 0..u {
            dr[i] = uh_t[i] * h_prev[i];
            carry[i] += uh_t[i] * rt[i];
        }

        // gate pre-activations
        for i in 0..u {
            dz_pre[i] = dz[i] * zt[i] * (1.0 - zt[i]);
            dr_pre[i] = dr[i] * rt[i] * (1.0 - rt[i]);
        }
        outer_acc(g.wz, &dz_pre, xt);
        outer_acc(g.uz, &dz_pre, h_prev);
        outer_acc(g.wr, &dr_pre, xt);
        outer_acc(g.ur, &dr_pre, h_prev);
        for i in 0..u {
            g.bz[i] += dz_pre[i];
            g.br[i] += dr_pre[i];
        }
        matvec_t_acc(p.uz, &dz_pre, &mut carry, u, u);
        matvec_t_acc(p.ur, &dr_pre, &mut carry, u, u);

        let dxt = &mut d_x[t * d..(t + 1) * d];
        matvec_t_acc(p.wh, &dhc_pre, dxt, u, d);
        matvec_t_acc(p.wz, &dz_pre, dxt, u, d);
        matvec_t_acc(p.wr, &dr_pre, dxt, u, d);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_params(d: usize, u: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (vec![0.0; u * d], vec![0.0; u * u], vec![0.0; u])
    }

    #[test]
    fn zero_params_zero_state_stays_zero() {
        let (w, uu, b) = zero_params(3, 2);
        let p = GruParams {
            wz: &w, uz: &uu, bz: &b, wr: &w, ur: &uu, br: &b,
            wh: &w, uh: &uu, bh: &b, input_dim: 3, hidden_dim: 2,
        };
        let mut h = vec![9.0; 2];
        let (mut z, mut r, mut hc) = (vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]);
        cell_forward(&[1.0, -2.0, 0.5], &[0.0, 0.0], p, &mut h, &mut z, &mut r, &mut hc);
        assert_eq!(h, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_params_halve_previous_state() {
        // z = σ(0) = 0.5 and ĥ = 0, so h' = 0.5·h_prev.
        let (w, uu, b) = zero_params(2, 2);
        let p = GruParams {
            wz: &w, uz: &uu, bz: &b, wr: &w, ur: &uu, br: &b,
            wh: &w, uh: &uu, bh: &b, input_dim: 2, hidden_dim: 2,
        };
        let mut h = vec![0.0; 2];
        let (mut z, mut r, mut hc) = (vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]);
        cell_forward(&[0.0, 0.0], &[0.8, -0.4], p, &mut h, &mut z, &mut r, &mut hc);
        assert!((h[0] - 0.4).abs() < 1e-15);
        assert!((h[1] + 0.2).abs() < 1e-15);
    }
}
