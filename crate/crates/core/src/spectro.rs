//! Per-packet transform, control-subcarrier pruning, normalization and
//! activity windowing.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::annotate::LabeledRange;
use crate::fft::{FftPlan, FFT_LEN};
use crate::ingest::CsiFrame;
use crate::Scalar;

/// Number of data subcarriers left after pruning the default control set.
pub const N_DATA_SUBCARRIERS: usize = 242;

/// Default window length in packets (2 s at 200 pps).
pub const DEFAULT_WINDOW: usize = 400;
pub const DEFAULT_STRIDE: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpectroError {
    #[error("expected {expected} values, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("antenna groups have unequal lengths {0:?}")]
    UnequalGroupLengths(Vec<usize>),
    #[error("capture contains no packets")]
    EmptyCapture,
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },
    #[error("window of {n_w} packets with stride {stride} does not fit {total} packets")]
    BadWindow { n_w: usize, stride: usize, total: usize },
    #[error("packet range {start}..={end} outside 0..{total}")]
    RangeOutOfBounds { start: usize, end: usize, total: usize },
    #[error("invalid prune mask: {0}")]
    BadMask(String),
}

pub type Result<T> = std::result::Result<T, SpectroError>;

/// Amplitude matrix with `n_packets * n_ant` rows (packet-major, antenna-minor)
/// and `n_cols` data subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<S> {
    pub data: Vec<S>,
    pub n_packets: usize,
    pub n_ant: usize,
    pub n_cols: usize,
    pub t0_us: u64,
    pub dt_us: f64,
}

impl<S: Scalar> Spectrogram<S> {
    pub fn rows(&self) -> usize {
        self.n_packets * self.n_ant
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.n_cols + c]
    }

    /// Packets `start..start + len` (all antennas).
    pub fn slice_packets(&self, start: usize, len: usize) -> Spectrogram<S> {
        let row0 = start * self.n_ant;
        let rows = len * self.n_ant;
        Spectrogram {
            data: self.data[row0 * self.n_cols..(row0 + rows) * self.n_cols].to_vec(),
            n_packets: len,
            n_ant: self.n_ant,
            n_cols: self.n_cols,
            t0_us: self.t0_us + (start as f64 * self.dt_us).round() as u64,
            dt_us: self.dt_us,
        }
    }

    /// Per-column mean over all rows.
    pub fn mean_row(&self) -> Vec<S> {
        let mut acc = vec![0.0f64; self.n_cols];
        for r in 0..self.rows() {
            for (a, &v) in acc.iter_mut().zip(self.row(r)) {
                *a += v.f64();
            }
        }
        let n = self.rows().max(1) as f64;
        acc.into_iter().map(|a| S::of(a / n)).collect()
    }

    pub fn cast<T: Scalar>(&self) -> Spectrogram<T> {
        Spectrogram {
            data: self.data.iter().map(|v| T::of(v.f64())).collect(),
            n_packets: self.n_packets,
            n_ant: self.n_ant,
            n_cols: self.n_cols,
            t0_us: self.t0_us,
            dt_us: self.dt_us,
        }
    }
}

/// FFT-bin indices dropped before the data subcarriers are kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneMask {
    removed: Vec<usize>,
}

impl Default for PruneMask {
    /// 80 MHz layout: DC nulls {-1, 0, +1} and edge guards
    /// {-128..=-123} and {+123..=+127}, 14 bins in total.
    fn default() -> Self {
        let centered: Vec<i32> = [-1, 0, 1].into_iter().chain(-128..=-123).chain(123..=127).collect();
        Self::from_centered(&centered).expect("default mask is valid")
    }
}

impl PruneMask {
    /// Builds a mask from centered indices in `-128..=127`.
    pub fn from_centered(centered: &[i32]) -> Result<Self> {
        let mut removed = Vec::with_capacity(centered.len());
        for &c in centered {
            if !(-128..=127).contains(&c) {
                return Err(SpectroError::BadMask(format!("centered index {c} outside -128..=127")));
            }
            removed.push(c.rem_euclid(FFT_LEN as i32) as usize);
        }
        removed.sort_unstable();
        removed.dedup();
        if removed.len() >= FFT_LEN {
            return Err(SpectroError::BadMask("mask removes every bin".into()));
        }
        Ok(Self { removed })
    }

    pub fn removed(&self) -> &[usize] {
        &self.removed
    }

    pub fn kept(&self) -> usize {
        FFT_LEN - self.removed.len()
    }

    pub fn apply<S: Copy>(&self, bins: &[S]) -> Result<Vec<S>> {
        if bins.len() != FFT_LEN {
            return Err(SpectroError::BadLength { expected: FFT_LEN, got: bins.len() });
        }
        let mut out = Vec::with_capacity(self.kept());
        let mut skip = self.removed.iter().peekable();
        for (k, &v) in bins.iter().enumerate() {
            if skip.peek() == Some(&&k) {
                skip.next();
            } else {
                out.push(v);
            }
        }
        Ok(out)
    }
}

/// Maps an FFT bin index to its centered index in `-128..=127`.
pub fn centered_index(k: usize) -> i32 {
    if k < FFT_LEN / 2 {
        k as i32
    } else {
        k as i32 - FFT_LEN as i32
    }
}

/// Removes the 14 default control bins, keeping the survivors in input order.
pub fn prune_control<S: Copy>(bins: &[S]) -> Result<Vec<S>> {
    PruneMask::default().apply(bins)
}

/// Per-packet transform applied before taking magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Fft,
    /// Use the captured subcarrier values directly.
    Identity,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectroOptions {
    #[serde(default)]
    pub transform: Transform,
    #[serde(default)]
    pub mask: PruneMask,
}

/// Builds the amplitude spectrogram from per-antenna, time-sorted streams.
pub fn build_spectrogram<S: Scalar>(groups: &[Vec<CsiFrame>], opts: &SpectroOptions) -> Result<Spectrogram<S>> {
    let n_ant = groups.len();
    if n_ant == 0 || groups[0].is_empty() {
        return Err(SpectroError::EmptyCapture);
    }
    let n = groups[0].len();
    if groups.iter().any(|g| g.len() != n) {
        return Err(SpectroError::UnequalGroupLengths(groups.iter().map(Vec::len).collect()));
    }
    let n_cols = opts.mask.kept();
    let plan = FftPlan::<f64>::new(FFT_LEN);
    let mut data = Vec::with_capacity(n * n_ant * n_cols);
    let mut buf: Vec<Complex<f64>> = Vec::with_capacity(FFT_LEN);
    for p in 0..n {
        for group in groups {
            let frame = &group[p];
            if frame.subcarriers.len() != FFT_LEN {
                return Err(SpectroError::BadLength { expected: FFT_LEN, got: frame.subcarriers.len() });
            }
            buf.clear();
            buf.extend_from_slice(&frame.subcarriers);
            if opts.transform == Transform::Fft {
                plan.process(&mut buf).expect("buffer length checked");
            }
            let mags: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
            data.extend(opts.mask.apply(&mags)?.into_iter().map(S::of));
        }
    }
    let first = &groups[0];
    let dt_us = if n > 1 {
        (first[n - 1].timestamp_us - first[0].timestamp_us) as f64 / (n - 1) as f64
    } else {
        0.0
    };
    Ok(Spectrogram { data, n_packets: n, n_ant, n_cols, t0_us: first[0].timestamp_us, dt_us })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Per-subcarrier zero mean, unit (population) variance over all rows.
    ZScore,
    /// Divide by the global maximum absolute value.
    #[default]
    MaxAbs,
    None,
}

pub fn normalize<S: Scalar>(spec: &Spectrogram<S>, scheme: Normalization) -> Result<Spectrogram<S>> {
    let rows = spec.rows();
    for (i, v) in spec.data.iter().enumerate() {
        if !v.is_finite() {
            return Err(SpectroError::NonFiniteInput { row: i / spec.n_cols, col: i % spec.n_cols });
        }
    }
    let mut out = spec.clone();
    match scheme {
        Normalization::None => {}
        Normalization::MaxAbs => {
            let max = spec.data.iter().fold(0.0f64, |m, v| m.max(v.f64().abs()));
            if max > 0.0 {
                for v in &mut out.data {
                    *v = S::of(v.f64() / max);
                }
            }
        }
        Normalization::ZScore => {
            let cols = spec.n_cols;
            for c in 0..cols {
                let col = (0..rows).map(|r| spec.data[r * cols + c].f64());
                let mean = col.clone().sum::<f64>() / rows as f64;
                let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / rows as f64;
                let std = var.sqrt();
                // relative floor so constant columns with rounding noise map to 0
                let zero_var = std <= 1e-12 * mean.abs().max(1e-300);
                for r in 0..rows {
                    let v = &mut out.data[r * cols + c];
                    *v = if zero_var { S::zero() } else { S::of((v.f64() - mean) / std) };
                }
            }
        }
    }
    Ok(out)
}

/// (environment, person, session) context of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Domain {
    pub env_id: u32,
    pub person_id: u32,
    pub session_id: u32,
}

/// Fixed-length labeled window of a session spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivitySample<S> {
    pub window: Spectrogram<S>,
    pub label: usize,
    pub domain: Domain,
    /// First packet of the window within its session.
    pub start_packet: usize,
}

/// Number of windows a span of `span_len` packets yields.
pub fn windows_in_span(span_len: usize, n_w: usize, stride: usize) -> usize {
    if span_len < n_w {
        0
    } else {
        (span_len - n_w) / stride + 1
    }
}

/// Cuts windows of `n_w` packets every `stride` packets inside each labeled
/// span. Windows never cross a span boundary.
pub fn window_samples<S: Scalar>(
    spec: &Spectrogram<S>,
    spans: &[LabeledRange],
    domain: Domain,
    n_w: usize,
    stride: usize,
) -> Result<Vec<ActivitySample<S>>> {
    if n_w == 0 || stride == 0 || n_w > spec.n_packets {
        return Err(SpectroError::BadWindow { n_w, stride, total: spec.n_packets });
    }
    let mut out = Vec::new();
    for span in spans {
        let (start, end) = (span.range.start_idx, span.range.end_idx);
        if start > end || end >= spec.n_packets {
            return Err(SpectroError::RangeOutOfBounds { start, end, total: spec.n_packets });
        }
        let count = windows_in_span(end - start + 1, n_w, stride);
        for j in 0..count {
            let offset = start + j * stride;
            out.push(ActivitySample {
                window: spec.slice_packets(offset, n_w),
                label: span.label,
                domain,
                start_packet: offset,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::PacketRange;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn const_frame(ts: u64, ant: u8, value: Complex<f64>) -> CsiFrame {
        CsiFrame::new(ts, ant, 0, vec![value; FFT_LEN]).unwrap()
    }

    fn span(label: usize, start: usize, end: usize) -> LabeledRange {
        LabeledRange { label, range: PacketRange { start_idx: start, end_idx: end } }
    }

    #[test]
    fn prune_yields_242() {
        let bins: Vec<f64> = (0..256).map(f64::from).collect();
        assert_eq!(prune_control(&bins).unwrap().len(), N_DATA_SUBCARRIERS);
    }

    #[test]
    fn prune_removes_exactly_the_control_set() {
        let bins: Vec<i32> = (0..256).map(centered_index).collect();
        let out = prune_control(&bins).unwrap();
        let control: Vec<i32> = [-1, 0, 1].into_iter().chain(-128..=-123).chain(123..=127).collect();
        assert_eq!(control.len(), 14);
        assert!(out.iter().all(|c| !control.contains(c)));
        assert!(out.windows(2).all(|w| centered_index_pos(w[0]) < centered_index_pos(w[1])));
    }

    fn centered_index_pos(c: i32) -> usize {
        c.rem_euclid(256) as usize
    }

    #[test]
    fn prune_rejects_wrong_length() {
        assert_eq!(
            prune_control(&[0.0f64; 128]),
            Err(SpectroError::BadLength { expected: 256, got: 128 })
        );
    }

    #[test]
    fn custom_mask() {
        let mask = PruneMask::from_centered(&[0, -128]).unwrap();
        assert_eq!(mask.kept(), 254);
        assert_eq!(mask.removed(), &[0, 128]);
        assert!(PruneMask::from_centered(&[200]).is_err());
    }

    #[test]
    fn shape_for_four_antennas() {
        let groups: Vec<Vec<CsiFrame>> = (0..4)
            .map(|a| (0..100).map(|p| const_frame(p * 5000, a, Complex::new(1.0, 0.0))).collect())
            .collect();
        let s: Spectrogram<f64> = build_spectrogram(&groups, &SpectroOptions::default()).unwrap();
        assert_eq!((s.rows(), s.n_cols), (400, 242));
        assert_eq!(s.data.len(), 400 * 242);
        assert_eq!(s.dt_us, 5000.0);
    }

    #[test]
    fn all_ones_frame_gives_dc_only() {
        // DC bin is itself a control bin, so nothing survives with energy
        let groups = vec![vec![const_frame(0, 0, Complex::new(1.0, 0.0))]];
        let s: Spectrogram<f64> = build_spectrogram(&groups, &SpectroOptions::default()).unwrap();
        assert_eq!(s.rows(), 1);
        assert!(s.data.iter().all(|&v| v.abs() < 1e-9));

        // with DC kept, its entry is 256 and all others vanish
        let opts = SpectroOptions { mask: PruneMask::from_centered(&[1, -1]).unwrap(), ..Default::default() };
        let s: Spectrogram<f64> = build_spectrogram(&groups, &opts).unwrap();
        assert!((s.data[0] - 256.0).abs() < 1e-9);
        assert!(s.data[1..].iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn identity_transform_bypasses_fft() {
        let sc: Vec<Complex<f64>> = (0..256).map(|k| Complex::new(k as f64, 0.0)).collect();
        let groups = vec![vec![CsiFrame::new(0, 0, 0, sc).unwrap()]];
        let opts = SpectroOptions { transform: Transform::Identity, ..Default::default() };
        let s: Spectrogram<f64> = build_spectrogram(&groups, &opts).unwrap();
        assert_eq!(s.data[0], 2.0);
        assert_eq!(s.data.len(), 242);
    }

    #[test]
    fn unequal_and_empty_groups() {
        let mk = |n: u64| (0..n).map(|p| const_frame(p, 0, Complex::new(1.0, 0.0))).collect::<Vec<_>>();
        assert!(matches!(
            build_spectrogram::<f64>(&[mk(100), mk(99)], &SpectroOptions::default()),
            Err(SpectroError::UnequalGroupLengths(_))
        ));
        assert_eq!(
            build_spectrogram::<f64>(&[], &SpectroOptions::default()),
            Err(SpectroError::EmptyCapture)
        );
    }

    fn random_spec(rows: usize, cols: usize, seed: u64) -> Spectrogram<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Spectrogram {
            data: (0..rows * cols).map(|_| rng.gen_range(0.0..5.0)).collect(),
            n_packets: rows,
            n_ant: 1,
            n_cols: cols,
            t0_us: 0,
            dt_us: 5000.0,
        }
    }

    #[test]
    fn zscore_of_constant_is_zero() {
        let mut s = random_spec(10, 242, 1);
        s.data.iter_mut().for_each(|v| *v = 3.7);
        let z = normalize(&s, Normalization::ZScore).unwrap();
        assert!(z.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn maxabs_peaks_at_one() {
        let mut s = random_spec(10, 20, 2);
        s.data[17] = 10.0;
        let m = normalize(&s, Normalization::MaxAbs).unwrap();
        let max = m.data.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn zscore_moments() {
        let s = random_spec(50, 242, 3);
        let z = normalize(&s, Normalization::ZScore).unwrap();
        for c in 0..242 {
            let col: Vec<f64> = (0..50).map(|r| z.get(r, c)).collect();
            let mean = col.iter().sum::<f64>() / 50.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 50.0;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn normalize_rejects_nan() {
        let mut s = random_spec(3, 4, 4);
        s.data[5] = f64::NAN;
        assert_eq!(
            normalize(&s, Normalization::MaxAbs),
            Err(SpectroError::NonFiniteInput { row: 1, col: 1 })
        );
    }

    #[test]
    fn window_counts() {
        let s = random_spec(2000, 4, 5);
        let d = Domain::default();
        assert_eq!(window_samples(&s, &[span(0, 0, 399)], d, 400, 400).unwrap().len(), 1);
        assert_eq!(window_samples(&s, &[span(0, 0, 398)], d, 400, 400).unwrap().len(), 0);
        let w = window_samples(&s, &[span(3, 100, 1099)], d, 400, 200).unwrap();
        let offsets: Vec<usize> = w.iter().map(|x| x.start_packet - 100).collect();
        // brute-force enumeration of admissible offsets
        let oracle: Vec<usize> = (0..1000).filter(|o| o % 200 == 0 && o + 400 <= 1000).collect();
        assert_eq!(offsets, oracle);
        assert_eq!(offsets, vec![0, 200, 400, 600]);
        assert!(w.iter().all(|x| x.label == 3 && x.window.n_packets == 400));
        assert_eq!(w[1].window, s.slice_packets(300, 400));
    }

    #[test]
    fn window_larger_than_capture() {
        let s = random_spec(100, 4, 6);
        assert!(matches!(
            window_samples(&s, &[], Domain::default(), 101, 1),
            Err(SpectroError::BadWindow { .. })
        ));
    }

    #[test]
    fn window_span_formula_matches_enumeration() {
        for span_len in 0..60 {
            for n_w in 1..12 {
                for stride in 1..7 {
                    let brute = (0..span_len).filter(|o| o % stride == 0 && o + n_w <= span_len).count();
                    assert_eq!(windows_in_span(span_len, n_w, stride), brute);
                }
            }
        }
    }
}
