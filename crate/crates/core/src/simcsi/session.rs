use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::profiles::{ActivityTemplate, EnvProfile, PersonProfile};
use super::{Result, SimError};
use crate::annotate::AnnotationRecord;
use crate::ingest::{CaptureHeader, CsiFrame, N_SUBCARRIERS};

/// Video annotation clock: 10 frames per second.
pub const FRAME_INTERVAL_US: u64 = 100_000;

/// Channel units per stored integer I/Q step.
pub const IQ_SCALE: f64 = 1024.0;

#[derive(Debug, Clone)]
pub struct SessionSpec<'a> {
    pub env: &'a EnvProfile,
    pub person: &'a PersonProfile,
    pub session_id: u32,
    /// (class name, duration in seconds), played back to back.
    pub script: Vec<(String, f64)>,
    pub rate_pps: u32,
    pub n_ant: u8,
    pub seed: u64,
    pub t0_us: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub header: CaptureHeader,
    pub frames: Vec<CsiFrame>,
    pub annotations: Vec<AnnotationRecord>,
    pub frame_timestamps: Vec<u64>,
}

struct Span<'a> {
    end_pkt: usize,
    template: &'a ActivityTemplate,
}

fn quantize(v: f64) -> f64 {
    (v * IQ_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64)
}

/// Generates one capture and its annotations. Frames are interleaved
/// packet-major; antenna `a` draws noise from stream `a` of the session seed.
pub fn generate_session(spec: &SessionSpec, templates: &[ActivityTemplate]) -> Result<Session> {
    if spec.script.is_empty() {
        return Err(SimError::EmptyScript);
    }
    if spec.rate_pps == 0 {
        return Err(SimError::Invalid("rate_pps must be > 0".into()));
    }
    if !matches!(spec.n_ant, 1 | 4) {
        return Err(SimError::Invalid(format!("n_ant must be 1 or 4, got {}", spec.n_ant)));
    }
    let rate = f64::from(spec.rate_pps);
    let mut spans = Vec::with_capacity(spec.script.len());
    let mut annotations = Vec::with_capacity(spec.script.len());
    let mut t = 0.0;
    for (name, dur) in &spec.script {
        let template = templates.iter().find(|tp| &tp.name == name).ok_or_else(|| SimError::UnknownClass(name.clone()))?;
        if !(*dur >= 0.1) {
            return Err(SimError::Invalid(format!("duration {dur} s is shorter than one video frame")));
        }
        let (start, end) = (t, t + dur);
        spans.push(Span { end_pkt: (end * rate).round() as usize, template });
        let fps = 1e6 / FRAME_INTERVAL_US as f64;
        annotations.push(AnnotationRecord {
            label: name.clone(),
            start_frame: (start * fps - 1e-9).ceil() as usize,
            end_frame: (end * fps - 1e-9).ceil() as usize - 1,
            env_id: spec.env.env_id,
            person_id: spec.person.person_id,
            session_id: spec.session_id,
        });
        t = end;
    }
    let n_packets = (t * rate).round() as usize;
    let n_video = (t * 1e6 / FRAME_INTERVAL_US as f64 - 1e-9).ceil() as u64;
    let frame_timestamps = (0..n_video).map(|i| spec.t0_us + i * FRAME_INTERVAL_US).collect();

    let n_ant = usize::from(spec.n_ant);
    let noise = Normal::new(0.0, spec.env.noise_std / std::f64::consts::SQRT_2)
        .map_err(|e| SimError::Invalid(e.to_string()))?;
    let mut rngs: Vec<ChaCha8Rng> = (0..n_ant)
        .map(|a| {
            let mut r = ChaCha8Rng::seed_from_u64(spec.seed);
            r.set_stream(a as u64);
            r
        })
        .collect();
    let tau = std::f64::consts::TAU;
    let (m, r) = (spec.person.motion_amp, spec.person.motion_rate);
    let mut frames = Vec::with_capacity(n_packets * n_ant);
    let mut span_idx = 0;
    for p in 0..n_packets {
        while span_idx + 1 < spans.len() && p >= spans[span_idx].end_pkt {
            span_idx += 1;
        }
        let comps = &spans[span_idx].template.components;
        let tp = p as f64 / rate;
        let ts = spec.t0_us + (p as f64 * 1e6 / rate).round() as u64;
        for (a, rng) in rngs.iter_mut().enumerate() {
            // Each antenna sees a small extra delay and a phase offset on the motion.
            let lag = 0.25 * a as f64;
            let psi = a as f64 * std::f64::consts::FRAC_PI_4;
            let sub: Vec<Complex<f64>> = (0..N_SUBCARRIERS)
                .map(|f| {
                    let ff = f as f64 / N_SUBCARRIERS as f64;
                    let mut mod_sum = 0.0;
                    for c in comps {
                        mod_sum += c.amplitude * (tau * (r * c.doppler_hz * tp + c.subcarrier_slope * ff) + psi).sin();
                    }
                    let mut clutter = 0.0;
                    for c in &spec.env.clutter {
                        clutter += c.amplitude * (tau * (c.doppler_hz * tp + c.subcarrier_slope * ff) + psi).sin();
                    }
                    let g = spec.env.static_gain[f] * Complex::from_polar(1.0, -tau * lag * ff);
                    let h = g * (1.0 + m * mod_sum + clutter) + Complex::new(noise.sample(rng), noise.sample(rng));
                    Complex::new(quantize(h.re), quantize(h.im))
                })
                .collect();
            frames.push(CsiFrame { timestamp_us: ts, antenna_id: a as u8, seq_no: p as u16, subcarriers: sub });
        }
    }
    let header = CaptureHeader::new(spec.n_ant, spec.rate_pps, frames.len() as u64);
    Ok(Session { header, frames, annotations, frame_timestamps })
}
