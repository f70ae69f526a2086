//! Maps foreign fixed-record CSI dumps (e.g. Nexmon UDP payload logs) onto
//! [`CsiFrame`]s using a declarative field table.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::capture::CaptureHeader;
use super::frame::CsiFrame;
use super::{IngestError, Result, N_SUBCARRIERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub offset: usize,
    /// 1, 2, 4 or 8 bytes.
    pub width: usize,
    #[serde(default)]
    pub big_endian: bool,
}

impl FieldSpec {
    fn read(&self, record: &[u8]) -> Result<u64> {
        if !matches!(self.width, 1 | 2 | 4 | 8) {
            return Err(IngestError::Layout(format!("field width {} not in {{1,2,4,8}}", self.width)));
        }
        let raw = record
            .get(self.offset..self.offset + self.width)
            .ok_or_else(|| IngestError::Layout(format!("field at {}+{} exceeds record", self.offset, self.width)))?;
        let mut buf = [0u8; 8];
        if self.big_endian {
            buf[8 - self.width..].copy_from_slice(raw);
            Ok(u64::from_be_bytes(buf))
        } else {
            buf[..self.width].copy_from_slice(raw);
            Ok(u64::from_le_bytes(buf))
        }
    }
}

/// How antenna ids are assigned when records carry no antenna field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AntennaOrdering {
    /// Record k belongs to antenna k mod n_ant.
    PerPacket,
    /// Runs of `burst_len` consecutive records share an antenna, cycling through antennas.
    PerBurst { burst_len: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportLayout {
    /// Bytes skipped at the start of the dump.
    #[serde(default)]
    pub header_offset: usize,
    pub record_len: usize,
    pub timestamp: FieldSpec,
    /// Multiplier converting the raw timestamp field to microseconds.
    #[serde(default = "one")]
    pub timestamp_scale_us: f64,
    #[serde(default)]
    pub seq: Option<FieldSpec>,
    #[serde(default)]
    pub antenna: Option<FieldSpec>,
    /// Offset of 256 interleaved (i16 real, i16 imag) pairs.
    pub csi_offset: usize,
    #[serde(default)]
    pub iq_big_endian: bool,
    pub n_ant: u8,
    pub sample_rate_pps: u32,
    #[serde(default = "per_packet")]
    pub antenna_ordering: AntennaOrdering,
}

fn one() -> f64 {
    1.0
}

fn per_packet() -> AntennaOrdering {
    AntennaOrdering::PerPacket
}

impl AntennaOrdering {
    fn antenna_for(&self, record_idx: usize, n_ant: u8) -> Result<u8> {
        let n = usize::from(n_ant);
        match *self {
            AntennaOrdering::PerPacket => Ok((record_idx % n) as u8),
            AntennaOrdering::PerBurst { burst_len } if burst_len >= 1 => Ok(((record_idx / burst_len) % n) as u8),
            AntennaOrdering::PerBurst { .. } => Err(IngestError::Layout("burst_len must be >= 1".into())),
        }
    }
}

/// Converts a raw dump into a canonical header and frame list (file order).
/// A trailing partial record is an error.
pub fn import_raw(bytes: &[u8], layout: &ImportLayout) -> Result<(CaptureHeader, Vec<CsiFrame>)> {
    let csi_end = layout.csi_offset + N_SUBCARRIERS * 4;
    if layout.record_len == 0 || csi_end > layout.record_len {
        return Err(IngestError::Layout(format!(
            "record_len {} cannot hold CSI block ending at {csi_end}",
            layout.record_len
        )));
    }
    let body = bytes
        .get(layout.header_offset..)
        .ok_or_else(|| IngestError::Layout("header_offset beyond end of input".into()))?;
    if body.len() % layout.record_len != 0 {
        return Err(IngestError::TruncatedFrame { need: layout.record_len, got: body.len() % layout.record_len });
    }
    let mut frames = Vec::with_capacity(body.len() / layout.record_len);
    for (idx, rec) in body.chunks_exact(layout.record_len).enumerate() {
        let ts_raw = layout.timestamp.read(rec)?;
        let timestamp_us = (ts_raw as f64 * layout.timestamp_scale_us).round() as u64;
        let seq_no = match layout.seq {
            Some(f) => f.read(rec)? as u16,
            None => idx as u16,
        };
        let antenna_id = match layout.antenna {
            Some(f) => f.read(rec)? as u8,
            None => layout.antenna_ordering.antenna_for(idx, layout.n_ant)?,
        };
        if antenna_id >= layout.n_ant {
            return Err(IngestError::InvalidAntenna { antenna_id, n_ant: layout.n_ant });
        }
        let subcarriers = rec[layout.csi_offset..csi_end]
            .chunks_exact(4)
            .map(|iq| {
                let (re, im) = if layout.iq_big_endian {
                    (i16::from_be_bytes([iq[0], iq[1]]), i16::from_be_bytes([iq[2], iq[3]]))
                } else {
                    (i16::from_le_bytes([iq[0], iq[1]]), i16::from_le_bytes([iq[2], iq[3]]))
                };
                Complex::new(f64::from(re), f64::from(im))
            })
            .collect();
        frames.push(CsiFrame { timestamp_us, antenna_id, seq_no, subcarriers });
    }
    let header = CaptureHeader::new(layout.n_ant, layout.sample_rate_pps, frames.len() as u64);
    Ok((header, frames))
}
