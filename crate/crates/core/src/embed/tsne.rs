use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::affinity::{conditional_affinities, kl_cost, order_free_sum, student_t_with_kernel, symmetrize};
use super::{EmbedError, Result};
use crate::Scalar;

pub const MAX_POINTS: usize = 5_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub perplexity: f64,
    pub n_iter: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    /// Standard deviation of the Gaussian initialization.
    pub init_std: f64,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            n_iter: 1000,
            learning_rate: 200.0,
            momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 250,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            init_std: 1e-4,
            seed: 0,
        }
    }
}

impl EmbedConfig {
    /// Caps perplexity at `(n - 1) / 3` for small inputs.
    pub fn clamped_for(mut self, n: usize) -> Self {
        let cap = (n.saturating_sub(1)) as f64 / 3.0;
        if self.perplexity > cap {
            self.perplexity = cap;
        }
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(EmbedError::Config(m.into()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.momentum) || !(0.0..1.0).contains(&self.final_momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if !(self.exaggeration >= 1.0) {
            return bad("exaggeration must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<S> {
    /// Row-major N x 2.
    pub points: Vec<S>,
    pub final_kl: f64,
    /// KL(P || Q) after every iteration (unexaggerated P); starts with the
    /// initial cost.
    pub history: Vec<f64>,
}

impl<S: Scalar> Embedding<S> {
    pub fn len(&self) -> usize {
        self.points.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gradient of `KL(P || Q)` w.r.t. the embedding:
/// `dC/dy_i = 4 sum_j (p_ij - q_ij)(y_i - y_j)(1 + |y_i - y_j|^2)^-1`.
pub fn kl_gradient<S: Scalar>(p: &[S], y: &[S], n: usize) -> Vec<S> {
    let (q, kernel) = student_t_with_kernel(y, n);
    gradient_with(p, &q, &kernel, y, n)
}

fn gradient_with<S: Scalar>(p: &[S], q: &[S], kernel: &[S], y: &[S], n: usize) -> Vec<S> {
    let mut grad = vec![S::zero(); 2 * n];
    let (mut tx, mut ty) = (vec![0.0f64; n], vec![0.0f64; n]);
    for i in 0..n {
        for j in 0..n {
            let w = ((p[i * n + j] - q[i * n + j]) * kernel[i * n + j]).f64();
            tx[j] = w * (y[2 * i] - y[2 * j]).f64();
            ty[j] = w * (y[2 * i + 1] - y[2 * j + 1]).f64();
        }
        grad[2 * i] = S::of(4.0 * order_free_sum(&tx));
        grad[2 * i + 1] = S::of(4.0 * order_free_sum(&ty));
    }
    grad
}

fn seeded_init<S: Scalar>(n: usize, cfg: &EmbedConfig) -> Vec<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.init_std).expect("init_std is finite");
    (0..2 * n).map(|_| S::of(normal.sample(&mut rng))).collect()
}

/// Embeds row-major `n x d` data into two dimensions.
pub fn tsne<S: Scalar>(x: &[S], n: usize, d: usize, cfg: &EmbedConfig) -> Result<Embedding<S>> {
    let init = seeded_init(n, cfg);
    tsne_from(x, n, d, init, cfg)
}

/// As [`tsne`], starting from an explicit initialization.
///
/// Updates use momentum with per-coordinate adaptive gains. After the
/// exaggeration phase a step that raises the cost is undone, the velocity is
/// cleared and the step size halved (later recovering by 5% per accepted step).
pub fn tsne_from<S: Scalar>(x: &[S], n: usize, d: usize, init: Vec<S>, cfg: &EmbedConfig) -> Result<Embedding<S>> {
    cfg.validate()?;
    if n > MAX_POINTS {
        return Err(EmbedError::TooManyPoints(n));
    }
    if init.len() != 2 * n {
        return Err(EmbedError::Shape(format!("init has {} values for {n} points", init.len())));
    }
    let cond = conditional_affinities(x, n, d, cfg.perplexity)?;
    let p = symmetrize(&cond);
    let p_exag: Vec<S> = p.iter().map(|&v| v * S::of(cfg.exaggeration)).collect();

    let mut y = init;
    let (q, _) = student_t_with_kernel(&y, n);
    let mut cost = kl_cost(&p, &q);
    let mut history = Vec::with_capacity(cfg.n_iter + 1);
    history.push(cost);

    let mut velocity = vec![S::zero(); 2 * n];
    let mut gains = vec![S::one(); 2 * n];
    let min_gain = S::of(0.01);
    let mut step_scale = 1.0f64;

    for it in 0..cfg.n_iter {
        let exaggerating = it < cfg.exaggeration_iters;
        let momentum = S::of(if it < cfg.momentum_switch_iter { cfg.momentum } else { cfg.final_momentum });
        let target = if exaggerating { &p_exag } else { &p };
        let (q, kernel) = student_t_with_kernel(&y, n);
        let grad = gradient_with(target, &q, &kernel, &y, n);

        let lr = S::of(cfg.learning_rate * step_scale);
        let mut next = y.clone();
        let mut next_gains = gains.clone();
        let mut next_velocity = velocity.clone();
        for k in 0..2 * n {
            let g = grad[k];
            let same_sign = (g > S::zero()) == (velocity[k] > S::zero());
            next_gains[k] = if same_sign { gains[k] * S::of(0.8) } else { gains[k] + S::of(0.2) };
            if next_gains[k] < min_gain {
                next_gains[k] = min_gain;
            }
            next_velocity[k] = momentum * velocity[k] - lr * next_gains[k] * g;
            next[k] = y[k] + next_velocity[k];
        }
        center(&mut next, n);

        let (q_next, _) = student_t_with_kernel(&next, n);
        let next_cost = kl_cost(&p, &q_next);
        if !exaggerating && next_cost > cost {
            velocity.iter_mut().for_each(|v| *v = S::zero());
            gains.iter_mut().for_each(|g| *g = S::one());
            step_scale *= 0.5;
        } else {
            y = next;
            gains = next_gains;
            velocity = next_velocity;
            cost = next_cost;
            if !exaggerating {
                step_scale = (step_scale * 1.05).min(1.0);
            }
        }
        history.push(cost);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(EmbedError::NonFinite);
    }
    Ok(Embedding { points: y, final_kl: cost, history })
}

fn center<S: Scalar>(y: &mut [S], n: usize) {
    for axis in 0..2 {
        let coords: Vec<f64> = (0..n).map(|i| y[2 * i + axis].f64()).collect();
        let mean = S::of(order_free_sum(&coords) / n as f64);
        for i in 0..n {
            y[2 * i + axis] -= mean;
        }
    }
}
