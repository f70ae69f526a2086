use super::{EmbedError, Result};
use crate::Scalar;

/// Floor applied to low-dimensional affinities before taking logs.
pub const Q_FLOOR: f64 = 1e-12;

const MAX_BISECTION_STEPS: usize = 200;
const PERPLEXITY_TOL: f64 = 1e-5;

/// Row-stochastic Gaussian affinities `p_{j|i}` and the bandwidths found for them.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalAffinities<S> {
    pub n: usize,
    /// Row-major N x N, zero diagonal.
    pub p: Vec<S>,
    pub sigma: Vec<f64>,
    /// `2^H_i` actually attained per row.
    pub realized_perplexity: Vec<f64>,
}

/// Sum that is bit-identical under any reordering of `terms`.
///
/// Terms are quantized to a fixed-point grid scaled by the largest magnitude
/// (itself order independent) and accumulated exactly in `i128`.
pub(crate) fn order_free_sum(terms: &[f64]) -> f64 {
    const FRAC_BITS: i32 = 96;
    let m = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if m == 0.0 || !m.is_finite() {
        return terms.iter().sum();
    }
    let unit = (FRAC_BITS as f64).exp2() / m;
    let acc: i128 = terms.iter().map(|&t| (t * unit).round() as i128).sum();
    acc as f64 / unit
}

pub(crate) fn squared_distances<S: Scalar>(x: &[S], n: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = (0..d).map(|k| (x[i * d + k].f64() - x[j * d + k].f64()).powi(2)).sum();
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    out
}

/// Entropy (nats) and normalized row for precision `beta = 1 / (2 sigma^2)`.
/// Distances are shifted by their minimum so the largest kernel value is 1.
fn row_at(dist: &[f64], i: usize, beta: f64, d_min: f64, row: &mut [f64], scratch: &mut Vec<f64>) -> f64 {
    for (j, (&dj, r)) in dist.iter().zip(row.iter_mut()).enumerate() {
        *r = if j == i { 0.0 } else { (-(dj - d_min) * beta).exp() };
    }
    let sum = order_free_sum(row);
    scratch.clear();
    scratch.extend(dist.iter().zip(row.iter()).map(|(&dj, &e)| (dj - d_min) * e));
    let weighted = order_free_sum(scratch);
    for r in row.iter_mut() {
        *r /= sum;
    }
    sum.ln() + beta * weighted / sum
}

/// `p_{j|i} = exp(-|x_i - x_j|^2 / 2 sigma_i^2) / sum_{k != i} exp(-|x_i - x_k|^2 / 2 sigma_i^2)`
/// with `sigma_i` bisected so that `2^{H_i}` equals `perplexity`.
///
/// `x` is row-major `n x d`.
pub fn conditional_affinities<S: Scalar>(x: &[S], n: usize, d: usize, perplexity: f64) -> Result<ConditionalAffinities<S>> {
    if x.len() != n * d {
        return Err(EmbedError::Shape(format!("{} values for {n}x{d}", x.len())));
    }
    if n < 3 {
        return Err(EmbedError::TooFewPoints(n));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(EmbedError::NonFinite);
    }
    let max = (n - 1) as f64;
    if !(perplexity > 1.0 && perplexity < max) {
        return Err(EmbedError::PerplexityTooLarge { perplexity, n, max });
    }
    let dist = squared_distances(x, n, d);
    if dist.iter().all(|&v| v == 0.0) {
        return Err(EmbedError::DegenerateData);
    }
    let target = perplexity.ln();
    let mut p = vec![S::zero(); n * n];
    let mut sigma = vec![0.0; n];
    let mut realized = vec![0.0; n];
    let mut row = vec![0.0; n];
    let mut scratch = Vec::with_capacity(n);
    for i in 0..n {
        let di = &dist[i * n..(i + 1) * n];
        let d_min = di.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).fold(f64::INFINITY, f64::min);
        let scale = order_free_sum(di) / (n - 1) as f64;
        let mut beta = if scale > 0.0 { 1.0 / scale } else { 1.0 };
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut h = row_at(di, i, beta, d_min, &mut row, &mut scratch);
        for _ in 0..MAX_BISECTION_STEPS {
            if (h.exp() - perplexity).abs() <= PERPLEXITY_TOL {
                break;
            }
            if h > target {
                // too flat: sharpen
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (lo + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (lo + hi);
            }
            h = row_at(di, i, beta, d_min, &mut row, &mut scratch);
        }
        sigma[i] = (0.5 / beta).sqrt();
        realized[i] = h.exp();
        for (dst, &v) in p[i * n..(i + 1) * n].iter_mut().zip(&row) {
            *dst = S::of(v);
        }
    }
    Ok(ConditionalAffinities { n, p, sigma, realized_perplexity: realized })
}

/// Joint affinities `p_ij = (p_{j|i} + p_{i|j}) / 2N`.
pub fn symmetrize<S: Scalar>(cond: &ConditionalAffinities<S>) -> Vec<S> {
    let n = cond.n;
    let denom = 2.0 * n as f64;
    let mut out = vec![S::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = S::of((cond.p[i * n + j].f64() + cond.p[j * n + i].f64()) / denom);
        }
    }
    out
}

/// Returns `(Q, kernel)` where `kernel_ij = (1 + |y_i - y_j|^2)^-1` and `Q` is
/// the kernel normalized over all `i != j`. `y` is row-major `n x 2`.
pub(crate) fn student_t_with_kernel<S: Scalar>(y: &[S], n: usize) -> (Vec<S>, Vec<S>) {
    let mut kernel = vec![S::zero(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[2 * i] - y[2 * j];
            let dy = y[2 * i + 1] - y[2 * j + 1];
            let k = S::one() / (S::one() + dx * dx + dy * dy);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }
    let as_f64: Vec<f64> = kernel.iter().map(|k| k.f64()).collect();
    let total = S::of(order_free_sum(&as_f64));
    let q = kernel.iter().map(|&k| k / total).collect();
    (q, kernel)
}

pub fn student_t_affinities<S: Scalar>(y: &[S], n: usize) -> Result<Vec<S>> {
    if y.len() != 2 * n {
        return Err(EmbedError::Shape(format!("{} values for {n}x2", y.len())));
    }
    if n < 2 {
        return Err(EmbedError::TooFewPoints(n));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(EmbedError::NonFinite);
    }
    Ok(student_t_with_kernel(y, n).0)
}

/// `sum p log(p / max(q, 1e-12))` with `0 log 0 = 0`.
pub fn kl_cost<S: Scalar>(p: &[S], q: &[S]) -> f64 {
    let terms: Vec<f64> = p
        .iter()
        .zip(q)
        .filter(|(p, _)| p.f64() > 0.0)
        .map(|(&p, &q)| {
            let p = p.f64();
            p * (p / q.f64().max(Q_FLOOR)).ln()
        })
        .collect();
    order_free_sum(&terms)
}
