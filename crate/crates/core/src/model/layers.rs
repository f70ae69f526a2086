use super::config::BlockShape;
use crate::Scalar;

#[inline]
pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub(crate) fn axpy<S: Scalar>(alpha: S, x: &[S], y: &mut [S]) {
    for (o, &v) in y.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

impl BlockShape {
    pub(crate) fn padded_dims(&self) -> (usize, usize) {
        (self.t_in + self.kt - 1, self.f_in + self.kf - 1)
    }

    pub(crate) fn padded_len(&self) -> usize {
        let (tp, fp) = self.padded_dims();
        self.c_in * tp * fp
    }

    pub(crate) fn plane(&self) -> usize {
        self.t_in * self.f_in
    }

    pub(crate) fn out_len(&self) -> usize {
        self.c_out * self.t_out * self.f_out
    }
}

/// Zero-pads one `[c_in, t, f]` input so a "same" convolution reads in bounds.
pub(crate) fn pad_input<S: Scalar>(x: &[S], s: &BlockShape, dst: &mut [S]) {
    let (tp, fp) = s.padded_dims();
    let (t0, f0) = ((s.kt - 1) / 2, (s.kf - 1) / 2);
    dst.fill(S::zero());
    for c in 0..s.c_in {
        for t in 0..s.t_in {
            let src = &x[(c * s.t_in + t) * s.f_in..][..s.f_in];
            dst[(c * tp + t + t0) * fp + f0..][..s.f_in].copy_from_slice(src);
        }
    }
}

/// `out[co] = b[co] + sum_ci w[co, ci] * padded[ci]` for one sample.
pub(crate) fn conv_forward<S: Scalar>(padded: &[S], w: &[S], b: &[S], s: &BlockShape, out: &mut [S]) {
    let (tp, fp) = s.padded_dims();
    let (t_n, f_n) = (s.t_in, s.f_in);
    for co in 0..s.c_out {
        let plane = &mut out[co * t_n * f_n..][..t_n * f_n];
        plane.fill(b[co]);
        for ci in 0..s.c_in {
            for dt in 0..s.kt {
                for df in 0..s.kf {
                    let wv = w[((co * s.c_in + ci) * s.kt + dt) * s.kf + df];
                    for t in 0..t_n {
                        let src = &padded[(ci * tp + t + dt) * fp + df..][..f_n];
                        axpy(wv, src, &mut plane[t * f_n..][..f_n]);
                    }
                }
            }
        }
    }
}

/// Accumulates weight/bias gradients and, when `dpadded` is given, the
/// gradient with respect to the padded input.
pub(crate) fn conv_backward<S: Scalar>(
    padded: &[S],
    w: &[S],
    dout: &[S],
    s: &BlockShape,
    dw: &mut [S],
    db: &mut [S],
    mut dpadded: Option<&mut [S]>,
) {
    let (tp, fp) = s.padded_dims();
    let (t_n, f_n) = (s.t_in, s.f_in);
    for co in 0..s.c_out {
        let plane = &dout[co * t_n * f_n..][..t_n * f_n];
        db[co] += plane.iter().copied().sum::<S>();
        for ci in 0..s.c_in {
            for dt in 0..s.kt {
                for df in 0..s.kf {
                    let wi = ((co * s.c_in + ci) * s.kt + dt) * s.kf + df;
                    let mut acc = S::zero();
                    for t in 0..t_n {
                        let base = (ci * tp + t + dt) * fp + df;
                        let g = &plane[t * f_n..][..f_n];
                        acc += dot(g, &padded[base..][..f_n]);
                        if let Some(dp) = dpadded.as_deref_mut() {
                            axpy(w[wi], g, &mut dp[base..][..f_n]);
                        }
                    }
                    dw[wi] += acc;
                }
            }
        }
    }
}

/// Inverse of [`pad_input`] for gradients: crops the interior.
pub(crate) fn crop_padded<S: Scalar>(dpadded: &[S], s: &BlockShape, dx: &mut [S]) {
    let (tp, fp) = s.padded_dims();
    let (t0, f0) = ((s.kt - 1) / 2, (s.kf - 1) / 2);
    for c in 0..s.c_in {
        for t in 0..s.t_in {
            dx[(c * s.t_in + t) * s.f_in..][..s.f_in]
                .copy_from_slice(&dpadded[(c * tp + t + t0) * fp + f0..][..s.f_in]);
        }
    }
}

/// ReLU followed by floor max-pooling on one `[c, t, f]` sample. `argmax`
/// records the winning in-plane offset of every output cell.
pub(crate) fn relu_pool<S: Scalar>(y: &[S], s: &BlockShape, out: &mut [S], argmax: &mut [u32]) {
    let plane = s.plane();
    for c in 0..s.c_out {
        let src = &y[c * plane..][..plane];
        for to in 0..s.t_out {
            for fo in 0..s.f_out {
                let mut best = S::neg_infinity();
                let mut best_i = 0;
                for dt in 0..s.pt {
                    let row = (to * s.pt + dt) * s.f_in;
                    for df in 0..s.pf {
                        let i = row + fo * s.pf + df;
                        if src[i] > best {
                            best = src[i];
                            best_i = i;
                        }
                    }
                }
                let o = (c * s.t_out + to) * s.f_out + fo;
                out[o] = best.max(S::zero());
                argmax[o] = best_i as u32;
            }
        }
    }
}

/// Routes pooled gradients back to the winning cells, zeroing where ReLU was off.
pub(crate) fn relu_pool_backward<S: Scalar>(y: &[S], dout: &[S], argmax: &[u32], s: &BlockShape, dy: &mut [S]) {
    let plane = s.plane();
    dy.fill(S::zero());
    for c in 0..s.c_out {
        for o in 0..s.t_out * s.f_out {
            let oi = c * s.t_out * s.f_out + o;
            let i = c * plane + argmax[oi] as usize;
            if y[i] > S::zero() {
                dy[i] += dout[oi];
            }
        }
    }
}

/// `y = W x + b` with `W` row-major `[out, in]`.
pub(crate) fn dense<S: Scalar>(w: &[S], b: &[S], x: &[S], y: &mut [S]) {
    let n_in = x.len();
    for (r, o) in y.iter_mut().enumerate() {
        *o = b[r] + dot(&w[r * n_in..][..n_in], x);
    }
}

pub(crate) fn dense_backward<S: Scalar>(w: &[S], x: &[S], dy: &[S], dw: &mut [S], db: &mut [S], dx: &mut [S]) {
    let n_in = x.len();
    for (r, &g) in dy.iter().enumerate() {
        db[r] += g;
        axpy(g, x, &mut dw[r * n_in..][..n_in]);
        axpy(g, &w[r * n_in..][..n_in], dx);
    }
}

/// Identity on the forward pass; multiplies gradients by `-lambda` on the way back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientReversal {
    pub lambda: f64,
}

impl GradientReversal {
    pub fn new(lambda: f64) -> Self {
        Self { lambda }
    }

    pub fn forward<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        x.to_vec()
    }

    pub fn backward<S: Scalar>(&self, grad: &[S]) -> Vec<S> {
        let k = S::of(-self.lambda);
        grad.iter().map(|&g| g * k).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(c_in: usize, c_out: usize, k: (usize, usize), t: usize, f: usize) -> BlockShape {
        BlockShape { c_in, c_out, kt: k.0, kf: k.1, t_in: t, f_in: f, pt: 2, pf: 2, t_out: t / 2, f_out: f / 2 }
    }

    #[test]
    fn conv_matches_direct_sum() {
        let s = shape(2, 3, (3, 2), 5, 4);
        let x: Vec<f64> = (0..2 * 5 * 4).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let w: Vec<f64> = (0..3 * 2 * 3 * 2).map(|i| ((i * 5) % 7) as f64 * 0.1 - 0.3).collect();
        let b = vec![0.5, -1.0, 2.0];
        let mut pad = vec![0.0; s.padded_len()];
        pad_input(&x, &s, &mut pad);
        let mut out = vec![0.0; 3 * 5 * 4];
        conv_forward(&pad, &w, &b, &s, &mut out);
        for co in 0..3 {
            for t in 0..5i64 {
                for f in 0..4i64 {
                    let mut acc = b[co];
                    for ci in 0..2 {
                        for dt in 0..3i64 {
                            for df in 0..2i64 {
                                let (tt, ff) = (t + dt - 1, f + df);
                                if (0..5).contains(&tt) && (0..4).contains(&ff) {
                                    acc += w[((co * 2 + ci) * 3 + dt as usize) * 2 + df as usize]
                                        * x[(ci * 5 + tt as usize) * 4 + ff as usize];
                                }
                            }
                        }
                    }
                    let got = out[(co * 5 + t as usize) * 4 + f as usize];
                    assert!((got - acc).abs() < 1e-12, "{got} vs {acc}");
                }
            }
        }
    }

    #[test]
    fn pool_floors_and_relus() {
        let s = BlockShape { c_in: 1, c_out: 1, kt: 1, kf: 1, t_in: 3, f_in: 5, pt: 2, pf: 2, t_out: 1, f_out: 2 };
        let y = vec![-1.0, -2.0, 3.0, 0.5, 9.0, -4.0, -3.0, 1.0, 2.0, 9.0, 100.0, 100.0, 100.0, 100.0, 100.0];
        let mut out = vec![0.0; 2];
        let mut am = vec![0; 2];
        relu_pool(&y, &s, &mut out, &mut am);
        assert_eq!(out, vec![0.0, 3.0]);
        assert_eq!(am, vec![0, 2]);
    }

    #[test]
    fn grl_identity_forward_negated_backward() {
        let g = GradientReversal::new(0.7);
        let x = vec![1.0f64, -2.0, 3.5];
        assert_eq!(g.forward(&x), x);
        let back = g.backward(&x);
        for (b, v) in back.iter().zip(&x) {
            assert_eq!(*b, -0.7 * v);
        }
    }
}
