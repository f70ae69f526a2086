use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Result, SimError};
use crate::ingest::N_SUBCARRIERS;

pub const DEFAULT_CLASSES: [&str; 10] = [
    "empty",
    "walking",
    "drinking",
    "arm-exercise",
    "clapping",
    "jogging",
    "squat",
    "falling",
    "sitting-down",
    "standing-up",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvProfile {
    pub env_id: u32,
    pub static_gain: Vec<Complex<f64>>,
    pub noise_std: f64,
    /// Ambient modulators (fans, curtains) present in every span, independent
    /// of the person.
    #[serde(default)]
    pub clutter: Vec<Component>,
}

impl EnvProfile {
    pub fn new(env_id: u32, static_gain: Vec<Complex<f64>>, noise_std: f64) -> Result<Self> {
        if static_gain.len() != N_SUBCARRIERS {
            return Err(SimError::Invalid(format!("static_gain needs {N_SUBCARRIERS} values")));
        }
        if static_gain.iter().any(|g| !(g.norm() > 0.0 && g.norm() <= 10.0)) {
            return Err(SimError::Invalid("|static_gain| must lie in (0, 10]".into()));
        }
        if !(noise_std >= 0.0) {
            return Err(SimError::Invalid("noise_std must be >= 0".into()));
        }
        Ok(Self { env_id, static_gain, noise_std, clutter: Vec::new() })
    }

    /// Unit line-of-sight tap plus `n_taps` random echoes whose total
    /// magnitude is `echo_energy` (< 1 keeps every bin away from zero).
    pub fn multipath(env_id: u32, n_taps: usize, echo_energy: f64, noise_std: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&echo_energy) {
            return Err(SimError::Invalid("echo_energy must be in [0, 1)".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(env_id) << 32));
        let taps: Vec<(f64, f64, f64)> = (0..n_taps)
            .map(|_| (rng.gen_range(0.2..1.0), rng.gen_range(2.0..48.0), rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect();
        let total: f64 = taps.iter().map(|t| t.0).sum::<f64>().max(f64::MIN_POSITIVE);
        let gain = (0..N_SUBCARRIERS)
            .map(|f| {
                let mut g = Complex::new(1.0, 0.0);
                for &(amp, delay, phase) in &taps {
                    let theta = phase - std::f64::consts::TAU * delay * f as f64 / N_SUBCARRIERS as f64;
                    g += Complex::from_polar(echo_energy * amp / total, theta);
                }
                g
            })
            .collect();
        Self::new(env_id, gain, noise_std)
    }
}

impl EnvProfile {
    /// Adds one clutter component with seeded rate in [0.5, 8) Hz and slope in [1, 20).
    pub fn with_random_clutter(mut self, amplitude: f64, seed: u64) -> Self {
        if amplitude > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(self.env_id) << 24) ^ 0xc1);
            self.clutter.push(Component {
                doppler_hz: rng.gen_range(0.5..8.0),
                amplitude,
                subcarrier_slope: rng.gen_range(1.0..20.0f64).round(),
            });
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersonProfile {
    pub person_id: u32,
    pub motion_amp: f64,
    pub motion_rate: f64,
}

impl PersonProfile {
    pub fn new(person_id: u32, motion_amp: f64, motion_rate: f64) -> Result<Self> {
        if !(motion_amp > 0.0 && motion_rate > 0.0) {
            return Err(SimError::Invalid("motion_amp and motion_rate must be > 0".into()));
        }
        Ok(Self { person_id, motion_amp, motion_rate })
    }

    /// Amplitude and rate drawn uniformly within `1 +- spread`.
    pub fn random(person_id: u32, spread: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(person_id) << 40) ^ 0x9e37);
        let s = spread.clamp(0.0, 0.9);
        let (amp, rate) = if s == 0.0 { (1.0, 1.0) } else { (rng.gen_range(1.0 - s..1.0 + s), rng.gen_range(1.0 - s..1.0 + s)) };
        Self::new(person_id, amp, rate)
    }
}

/// One sinusoidal modulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub doppler_hz: f64,
    pub amplitude: f64,
    /// Cycles across the 256 subcarriers.
    pub subcarrier_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityTemplate {
    pub class_id: usize,
    pub name: String,
    pub components: Vec<Component>,
    pub duration_range: (f64, f64),
}

fn template(class_id: usize, parts: &[(f64, f64, f64)]) -> ActivityTemplate {
    ActivityTemplate {
        class_id,
        name: DEFAULT_CLASSES[class_id].to_string(),
        components: parts
            .iter()
            .map(|&(doppler_hz, amplitude, subcarrier_slope)| Component { doppler_hz, amplitude, subcarrier_slope })
            .collect(),
        duration_range: (2.0, 4.0),
    }
}

/// The ten default classes. 'arm-exercise' and 'clapping' share their
/// 6 Hz component and differ in its amplitude.
pub fn default_templates() -> Vec<ActivityTemplate> {
    vec![
        template(0, &[]),
        template(1, &[(1.8, 0.30, 6.0), (3.6, 0.15, 11.0)]),
        template(2, &[(0.8, 0.20, 3.0)]),
        template(3, &[(1.2, 0.15, 4.0), (6.0, 0.25, 9.0)]),
        template(4, &[(6.0, 0.12, 9.0)]),
        template(5, &[(2.8, 0.35, 7.0), (5.6, 0.20, 13.0)]),
        template(6, &[(0.6, 0.30, 5.0)]),
        template(7, &[(2.2, 0.45, 14.0)]),
        template(8, &[(0.4, 0.25, 2.0), (1.0, 0.10, 10.0)]),
        template(9, &[(0.5, 0.25, 12.0), (1.5, 0.10, 2.0)]),
    ]
}
