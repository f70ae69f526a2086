//! Camera-frame to CSI-packet alignment and annotation conversion.
//!
//! Annotations are JSON Lines, one activity span per line:
//!
//! ```text
//! {"label":"walking","start_frame":0,"end_frame":19,"env_id":0,"person_id":1,"session_id":3}
//! ```

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

/// One camera frame period at 10 fps.
pub const DEFAULT_TOLERANCE_US: u64 = 100_000;

#[derive(Debug, thiserror::Error)]
pub enum AnnotateError {
    #[error("empty timestamp list")]
    EmptyInput,
    #[error("timestamps not sorted at index {0}")]
    Unsorted(usize),
    #[error("frame {0} has no packet within tolerance")]
    UnalignedFrame(usize),
    #[error("annotation start_frame {start} > end_frame {end}")]
    BadSpan { start: usize, end: usize },
    #[error("unknown activity label {0:?}")]
    UnknownLabel(String),
    #[error("annotation line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AnnotateError>;

/// One JSONL annotation line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub label: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub env_id: u32,
    pub person_id: u32,
    pub session_id: u32,
}

/// A span resolved to a class id. Frames are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Annotation {
    pub label: usize,
    pub start_frame: usize,
    pub end_frame: usize,
}

impl AnnotationRecord {
    pub fn resolve(&self, classes: &[String]) -> Result<Annotation> {
        let label = classes
            .iter()
            .position(|c| c == &self.label)
            .ok_or_else(|| AnnotateError::UnknownLabel(self.label.clone()))?;
        if self.start_frame > self.end_frame {
            return Err(AnnotateError::BadSpan { start: self.start_frame, end: self.end_frame });
        }
        Ok(Annotation { label, start_frame: self.start_frame, end_frame: self.end_frame })
    }
}

/// Inclusive index range into a time-sorted packet stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRange {
    pub start_idx: usize,
    pub end_idx: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledRange {
    pub label: usize,
    pub range: PacketRange,
}

/// Nearest-packet match for every camera frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// Packet index per frame, `None` when the nearest packet is beyond tolerance.
    pub packet: Vec<Option<usize>>,
    /// Signed `packet_ts - frame_ts` of the nearest packet.
    pub delta_us: Vec<i64>,
}

impl Alignment {
    pub fn unmatched(&self) -> Vec<usize> {
        self.packet.iter().enumerate().filter(|(_, p)| p.is_none()).map(|(i, _)| i).collect()
    }
}

fn check_sorted(ts: &[u64]) -> Result<()> {
    if ts.is_empty() {
        return Err(AnnotateError::EmptyInput);
    }
    match ts.windows(2).position(|w| w[0] > w[1]) {
        Some(i) => Err(AnnotateError::Unsorted(i + 1)),
        None => Ok(()),
    }
}

/// Maps each frame to the packet minimizing `|dt|`; ties go to the earlier packet.
pub fn align(frame_ts: &[u64], csi_ts: &[u64], tolerance_us: u64) -> Result<Alignment> {
    align_with_offset(frame_ts, csi_ts, tolerance_us, 0)
}

/// As [`align`], after shifting frame timestamps by `offset_us`.
pub fn align_with_offset(frame_ts: &[u64], csi_ts: &[u64], tolerance_us: u64, offset_us: i64) -> Result<Alignment> {
    check_sorted(frame_ts)?;
    check_sorted(csi_ts)?;
    let mut packet = Vec::with_capacity(frame_ts.len());
    let mut delta_us = Vec::with_capacity(frame_ts.len());
    for &f in frame_ts {
        let f = f as i128 + offset_us as i128;
        // first packet with ts >= f
        let hi = csi_ts.partition_point(|&c| (c as i128) < f);
        let best = match (hi.checked_sub(1), (hi < csi_ts.len()).then_some(hi)) {
            (Some(lo), Some(hi)) => {
                if f - csi_ts[lo] as i128 <= csi_ts[hi] as i128 - f {
                    lo
                } else {
                    hi
                }
            }
            (Some(lo), None) => lo,
            (None, Some(hi)) => hi,
            (None, None) => unreachable!("csi_ts is nonempty"),
        };
        // among equal timestamps keep the earliest index
        let best = csi_ts.partition_point(|&c| c < csi_ts[best]);
        let d = csi_ts[best] as i128 - f;
        delta_us.push(d as i64);
        packet.push((d.unsigned_abs() <= u128::from(tolerance_us)).then_some(best));
    }
    Ok(Alignment { packet, delta_us })
}

/// Median of nearest-packet offsets; a constant camera/receiver clock skew estimate.
pub fn estimate_clock_offset(frame_ts: &[u64], csi_ts: &[u64]) -> Result<i64> {
    let a = align(frame_ts, csi_ts, u64::MAX)?;
    let mut d = a.delta_us;
    d.sort_unstable();
    Ok(d[d.len() / 2])
}

/// A span dropped because it mapped to an empty packet range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedSpan {
    pub annotation: Annotation,
    pub start_idx: usize,
    pub end_idx: usize,
}

pub fn to_packet_ranges(
    annotations: &[Annotation],
    alignment: &Alignment,
) -> Result<(Vec<LabeledRange>, Vec<DroppedSpan>)> {
    let lookup = |frame: usize| -> Result<usize> {
        alignment.packet.get(frame).copied().flatten().ok_or(AnnotateError::UnalignedFrame(frame))
    };
    let mut ranges = Vec::with_capacity(annotations.len());
    let mut dropped = Vec::new();
    for a in annotations {
        let (s, e) = (lookup(a.start_frame)?, lookup(a.end_frame)?);
        if s > e {
            log::warn!("annotation {:?} maps to empty packet range {s}..={e}", a);
            dropped.push(DroppedSpan { annotation: *a, start_idx: s, end_idx: e });
        } else {
            ranges.push(LabeledRange { label: a.label, range: PacketRange { start_idx: s, end_idx: e } });
        }
    }
    Ok((ranges, dropped))
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| AnnotateError::Parse { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_annotations(path: impl AsRef<Path>, records: &[AnnotationRecord]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut file, r)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

/// Camera frame timestamps are stored as a JSON array of microseconds.
pub fn read_frame_timestamps(path: impl AsRef<Path>) -> Result<Vec<u64>> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

pub fn write_frame_timestamps(path: impl AsRef<Path>, ts: &[u64]) -> Result<()> {
    std::fs::write(path, serde_json::to_vec(ts)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn brute_nearest(f: u64, csi: &[u64]) -> (usize, u64) {
        let mut best = (0, u64::MAX);
        for (i, &c) in csi.iter().enumerate() {
            let d = c.abs_diff(f);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn identical_lists_align_identically() {
        let ts: Vec<u64> = (0..50).map(|i| i * 5000).collect();
        let a = align(&ts, &ts, 0).unwrap();
        assert_eq!(a.packet, (0..50).map(Some).collect::<Vec<_>>());
        assert!(a.delta_us.iter().all(|&d| d == 0));
    }

    #[test]
    fn tie_goes_to_earlier_packet() {
        let a = align(&[1000], &[900, 1100], DEFAULT_TOLERANCE_US).unwrap();
        assert_eq!(a.packet, vec![Some(0)]);
    }

    #[test]
    fn beyond_tolerance_is_unmatched() {
        let a = align(&[0, 500_000], &[10, 20], 1000).unwrap();
        assert_eq!(a.packet, vec![Some(0), None]);
        assert_eq!(a.unmatched(), vec![1]);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(align(&[], &[1], 10), Err(AnnotateError::EmptyInput)));
        assert!(matches!(align(&[1], &[], 10), Err(AnnotateError::EmptyInput)));
    }

    #[test]
    fn matches_exhaustive_search() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let mut f: Vec<u64> = (0..40).map(|_| rng.gen_range(0..100_000)).collect();
            let mut c: Vec<u64> = (0..300).map(|_| rng.gen_range(0..100_000)).collect();
            f.sort_unstable();
            c.sort_unstable();
            let a = align(&f, &c, u64::MAX).unwrap();
            for (i, &ft) in f.iter().enumerate() {
                let (idx, d) = brute_nearest(ft, &c);
                assert_eq!(a.packet[i], Some(idx));
                assert_eq!(a.delta_us[i].unsigned_abs(), d);
            }
        }
    }

    fn synthetic_streams(n_frames: u64) -> (Vec<u64>, Vec<u64>) {
        // 10 fps camera, 200 pps CSI
        let frames = (0..n_frames).map(|i| i * 100_000).collect();
        let csi = (0..n_frames * 20).map(|i| i * 5_000).collect();
        (frames, csi)
    }

    #[test]
    fn ten_fps_against_two_hundred_pps() {
        let (frames, csi) = synthetic_streams(30);
        let a = align(&frames, &csi, DEFAULT_TOLERANCE_US).unwrap();
        let ann = [Annotation { label: 2, start_frame: 0, end_frame: 9 }];
        let (r, dropped) = to_packet_ranges(&ann, &a).unwrap();
        assert!(dropped.is_empty());
        // hand mapping: frame k sits exactly on packet 20k
        assert_eq!(r[0].range, PacketRange { start_idx: 0, end_idx: 180 });
        assert_eq!(r[0].label, 2);
    }

    #[test]
    fn unmatched_start_frame() {
        let a = Alignment { packet: vec![None, Some(3)], delta_us: vec![0, 0] };
        let ann = [Annotation { label: 0, start_frame: 0, end_frame: 1 }];
        assert!(matches!(to_packet_ranges(&ann, &a), Err(AnnotateError::UnalignedFrame(0))));
    }

    #[test]
    fn one_frame_annotation() {
        let (frames, csi) = synthetic_streams(5);
        let a = align(&frames, &csi, DEFAULT_TOLERANCE_US).unwrap();
        let (r, _) = to_packet_ranges(&[Annotation { label: 1, start_frame: 3, end_frame: 3 }], &a).unwrap();
        assert!(r[0].range.end_idx >= r[0].range.start_idx);
        assert_eq!(r[0].range.start_idx, 60);
    }

    #[test]
    fn clock_offset_estimate() {
        let (frames, csi) = synthetic_streams(20);
        let shifted: Vec<u64> = frames.iter().map(|t| t + 1_000_000).collect();
        let csi_shifted: Vec<u64> = csi.iter().map(|t| t + 1_000_000 + 1_500).collect();
        assert_eq!(estimate_clock_offset(&shifted, &csi_shifted).unwrap(), 1_500);
        let a = align_with_offset(&shifted, &csi_shifted, 10, 1_500).unwrap();
        assert!(a.delta_us.iter().all(|&d| d == 0));
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.jsonl");
        let recs = vec![
            AnnotationRecord { label: "walking".into(), start_frame: 0, end_frame: 19, env_id: 0, person_id: 1, session_id: 2 },
            AnnotationRecord { label: "empty".into(), start_frame: 20, end_frame: 39, env_id: 0, person_id: 1, session_id: 2 },
        ];
        write_annotations(&p, &recs).unwrap();
        assert_eq!(read_annotations(&p).unwrap(), recs);
        let classes = vec!["empty".to_string(), "walking".to_string()];
        assert_eq!(recs[0].resolve(&classes).unwrap().label, 1);
        let mut bad = recs[0].clone();
        bad.label = "dancing".into();
        assert!(matches!(bad.resolve(&classes), Err(AnnotateError::UnknownLabel(_))));
    }

    #[test]
    fn missing_key_is_reported_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.jsonl");
        std::fs::write(&p, "{\"label\":\"x\",\"start_frame\":0}\n").unwrap();
        let err = read_annotations(&p).unwrap_err();
        assert!(matches!(err, AnnotateError::Parse { line: 1, .. }));
        assert!(err.to_string().contains("end_frame"));
    }

    proptest! {
        #[test]
        fn ranges_are_monotone(cuts in prop::collection::btree_set(0usize..200, 2..12)) {
            let (frames, csi) = synthetic_streams(200);
            let a = align(&frames, &csi, DEFAULT_TOLERANCE_US).unwrap();
            let cuts: Vec<usize> = cuts.into_iter().collect();
            let anns: Vec<Annotation> = cuts.windows(2)
                .map(|w| Annotation { label: 0, start_frame: w[0], end_frame: w[1] - 1 })
                .collect();
            let (r, _) = to_packet_ranges(&anns, &a).unwrap();
            for w in r.windows(2) {
                prop_assert!(w[0].range.end_idx <= w[1].range.start_idx);
            }
            prop_assert_eq!(align(&frames, &csi, DEFAULT_TOLERANCE_US).unwrap(), a);
        }
    }
}
