//! Iterative radix-2 FFT, forward and unnormalized:
//! `X[k] = sum_n x[n] * exp(-2 pi i k n / N)`.

use num_complex::Complex;

use crate::Scalar;

pub const FFT_LEN: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FftError {
    #[error("expected {expected} samples, got {got}")]
    BadLength { expected: usize, got: usize },
}

/// Precomputed bit-reversal permutation and twiddles for one power-of-two size.
#[derive(Debug, Clone)]
pub struct FftPlan<S> {
    n: usize,
    rev: Vec<usize>,
    twiddles: Vec<Complex<S>>,
}

impl<S: Scalar> FftPlan<S> {
    /// Panics unless `n` is a nonzero power of two.
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT size must be a power of two");
        let bits = n.trailing_zeros();
        let rev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        // twiddles evaluated directly in f64, no recurrence
        let twiddles = (0..n / 2)
            .map(|k| {
                let angle = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Complex::new(S::of(angle.cos()), S::of(angle.sin()))
            })
            .collect();
        Self { n, rev, twiddles }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn process(&self, buf: &mut [Complex<S>]) -> Result<(), FftError> {
        if buf.len() != self.n {
            return Err(FftError::BadLength { expected: self.n, got: buf.len() });
        }
        for i in 0..self.n {
            let j = self.rev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < self.n {
            let stride = self.n / (2 * half);
            for start in (0..self.n).step_by(2 * half) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
        Ok(())
    }
}

/// Forward transform of exactly 256 samples.
pub fn fft256<S: Scalar>(x: &[Complex<S>]) -> Result<Vec<Complex<S>>, FftError> {
    if x.len() != FFT_LEN {
        return Err(FftError::BadLength { expected: FFT_LEN, got: x.len() });
    }
    let mut buf = x.to_vec();
    FftPlan::new(FFT_LEN).process(&mut buf)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dft_oracle(x: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex::new(0.0, 0.0), |acc, (j, &v)| {
                    let ang = -2.0 * std::f64::consts::PI * ((k * j) % n) as f64 / n as f64;
                    acc + v * Complex::new(ang.cos(), ang.sin())
                })
            })
            .collect()
    }

    fn random(rng: &mut ChaCha8Rng) -> Vec<Complex<f64>> {
        (0..FFT_LEN).map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn rel_err(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
        num / den
    }

    #[test]
    fn all_ones_is_dc_impulse() {
        let out = fft256(&vec![Complex::new(1.0f64, 0.0); FFT_LEN]).unwrap();
        assert!((out[0] - Complex::new(256.0, 0.0)).norm() < 1e-9);
        assert!(out[1..].iter().all(|c| c.norm() < 1e-9));
    }

    #[test]
    fn matches_direct_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = random(&mut rng);
            assert!(rel_err(&fft256(&x).unwrap(), &dft_oracle(&x)) <= 1e-9);
        }
    }

    #[test]
    fn is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (x, y) = (random(&mut rng), random(&mut rng));
        let (a, b) = (Complex::new(0.7, -1.3), Complex::new(-2.1, 0.4));
        let combo: Vec<_> = x.iter().zip(&y).map(|(&u, &v)| a * u + b * v).collect();
        let lhs = fft256(&combo).unwrap();
        let (fx, fy) = (fft256(&x).unwrap(), fft256(&y).unwrap());
        for k in 0..FFT_LEN {
            assert!((lhs[k] - (a * fx[k] + b * fy[k])).norm() < 1e-9);
        }
    }

    #[test]
    fn parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(&mut rng);
        let e_time: f64 = x.iter().map(|c| c.norm_sqr()).sum();
        let e_freq: f64 = fft256(&x).unwrap().iter().map(|c| c.norm_sqr()).sum();
        assert!((e_freq - 256.0 * e_time).abs() / (256.0 * e_time) < 1e-6);
    }

    #[test]
    fn wrong_length() {
        assert_eq!(
            fft256(&vec![Complex::new(0.0f32, 0.0); 128]),
            Err(FftError::BadLength { expected: 256, got: 128 })
        );
    }

    #[test]
    fn single_precision_tracks_double() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random(&mut rng);
        let x32: Vec<Complex<f32>> = x.iter().map(|c| Complex::new(c.re as f32, c.im as f32)).collect();
        let out32 = fft256(&x32).unwrap();
        let back: Vec<Complex<f64>> = out32.iter().map(|c| Complex::new(c.re as f64, c.im as f64)).collect();
        assert!(rel_err(&back, &dft_oracle(&x)) < 1e-5);
    }

    #[test]
    fn other_power_of_two_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 8, 64] {
            let x: Vec<Complex<f64>> = (0..n).map(|_| Complex::new(rng.gen(), rng.gen())).collect();
            let mut buf = x.clone();
            FftPlan::new(n).process(&mut buf).unwrap();
            assert!(rel_err(&buf, &dft_oracle(&x)) < 1e-12);
        }
    }
}
