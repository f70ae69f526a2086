use crate::Scalar;

/// Adam with bias correction and zero-initialized moments.
#[derive(Debug, Clone)]
pub struct Adam<S> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<S>,
    v: Vec<S>,
    t: u32,
}

impl<S: Scalar> Adam<S> {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { lr, beta1, beta2, eps, m: vec![S::zero(); n], v: vec![S::zero(); n], t: 0 }
    }

    pub fn with_defaults(n: usize, lr: f64) -> Self {
        Self::new(n, lr, 0.9, 0.999, 1e-8)
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    pub fn step(&mut self, params: &mut [S], grads: &[S]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let (b1, b2) = (S::of(self.beta1), S::of(self.beta2));
        let c1 = S::of(1.0 - self.beta1.powi(self.t as i32));
        let c2 = S::of(1.0 - self.beta2.powi(self.t as i32));
        let (lr, eps) = (S::of(self.lr), S::of(self.eps));
        let one = S::one();
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
}
