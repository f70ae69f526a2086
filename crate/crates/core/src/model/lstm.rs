use super::layers::{axpy, dot};
use crate::Scalar;

#[inline]
fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Weights of one LSTM direction. Gate order is input, forget, cell, output.
pub(crate) struct LstmWeights<'a, S> {
    pub w_ih: &'a [S],
    pub w_hh: &'a [S],
    pub bias: &'a [S],
    pub input: usize,
    pub hidden: usize,
}

/// Activations of one direction over a sequence, indexed by original time.
#[derive(Debug, Clone)]
pub(crate) struct LstmTrace<S> {
    pub gates: Vec<S>,
    pub c: Vec<S>,
    pub tanh_c: Vec<S>,
    pub h: Vec<S>,
    pub reverse: bool,
}

pub(crate) fn step_order(t_len: usize, reverse: bool) -> impl DoubleEndedIterator<Item = usize> {
    (0..t_len).map(move |s| if reverse { t_len - 1 - s } else { s })
}

pub(crate) fn lstm_forward<S: Scalar>(wts: &LstmWeights<S>, x: &[S], t_len: usize, reverse: bool) -> LstmTrace<S> {
    let (h_n, i_n) = (wts.hidden, wts.input);
    let mut tr = LstmTrace {
        gates: vec![S::zero(); t_len * 4 * h_n],
        c: vec![S::zero(); t_len * h_n],
        tanh_c: vec![S::zero(); t_len * h_n],
        h: vec![S::zero(); t_len * h_n],
        reverse,
    };
    let mut h_prev = vec![S::zero(); h_n];
    let mut c_prev = vec![S::zero(); h_n];
    let mut z = vec![S::zero(); 4 * h_n];
    for t in step_order(t_len, reverse) {
        let xt = &x[t * i_n..][..i_n];
        for (r, zr) in z.iter_mut().enumerate() {
            *zr = wts.bias[r] + dot(&wts.w_ih[r * i_n..][..i_n], xt) + dot(&wts.w_hh[r * h_n..][..h_n], &h_prev);
        }
        let g = &mut tr.gates[t * 4 * h_n..][..4 * h_n];
        for j in 0..h_n {
            let ig = sigmoid(z[j]);
            let fg = sigmoid(z[h_n + j]);
            let gg = z[2 * h_n + j].tanh();
            let og = sigmoid(z[3 * h_n + j]);
            g[j] = ig;
            g[h_n + j] = fg;
            g[2 * h_n + j] = gg;
            g[3 * h_n + j] = og;
            let c = fg * c_prev[j] + ig * gg;
            let tc = c.tanh();
            tr.c[t * h_n + j] = c;
            tr.tanh_c[t * h_n + j] = tc;
            tr.h[t * h_n + j] = og * tc;
        }
        h_prev.copy_from_slice(&tr.h[t * h_n..][..h_n]);
        c_prev.copy_from_slice(&tr.c[t * h_n..][..h_n]);
    }
    tr
}

pub(crate) struct LstmGrads<'a, S> {
    pub w_ih: &'a mut [S],
    pub w_hh: &'a mut [S],
    pub bias: &'a mut [S],
}

/// Backpropagation through time. `dh` holds loss gradients on each output
/// `h[t]`; input gradients are accumulated into `dx`.
pub(crate) fn lstm_backward<S: Scalar>(
    wts: &LstmWeights<S>,
    tr: &LstmTrace<S>,
    x: &[S],
    dh: &[S],
    t_len: usize,
    g: LstmGrads<S>,
    dx: &mut [S],
) {
    let (h_n, i_n) = (wts.hidden, wts.input);
    let zero_state = vec![S::zero(); h_n];
    let mut dh_carry = vec![S::zero(); h_n];
    let mut dc_carry = vec![S::zero(); h_n];
    let mut dz = vec![S::zero(); 4 * h_n];
    let order: Vec<usize> = step_order(t_len, tr.reverse).collect();
    for (s, &t) in order.iter().enumerate().rev() {
        let (h_prev, c_prev) = if s == 0 {
            (&zero_state[..], &zero_state[..])
        } else {
            let p = order[s - 1];
            (&tr.h[p * h_n..][..h_n], &tr.c[p * h_n..][..h_n])
        };
        let gates = &tr.gates[t * 4 * h_n..][..4 * h_n];
        for j in 0..h_n {
            let (ig, fg, gg, og) = (gates[j], gates[h_n + j], gates[2 * h_n + j], gates[3 * h_n + j]);
            let tc = tr.tanh_c[t * h_n + j];
            let dhj = dh[t * h_n + j] + dh_carry[j];
            let d_o = dhj * tc;
            let dc = dhj * og * (S::one() - tc * tc) + dc_carry[j];
            dc_carry[j] = dc * fg;
            dz[j] = dc * gg * ig * (S::one() - ig);
            dz[h_n + j] = dc * c_prev[j] * fg * (S::one() - fg);
            dz[2 * h_n + j] = dc * ig * (S::one() - gg * gg);
            dz[3 * h_n + j] = d_o * og * (S::one() - og);
        }
        let xt = &x[t * i_n..][..i_n];
        let dxt = &mut dx[t * i_n..][..i_n];
        dh_carry.fill(S::zero());
        for (r, &d) in dz.iter().enumerate() {
            g.bias[r] += d;
            axpy(d, xt, &mut g.w_ih[r * i_n..][..i_n]);
            axpy(d, h_prev, &mut g.w_hh[r * h_n..][..h_n]);
            axpy(d, &wts.w_ih[r * i_n..][..i_n], dxt);
            axpy(d, &wts.w_hh[r * h_n..][..h_n], &mut dh_carry);
        }
    }
}
