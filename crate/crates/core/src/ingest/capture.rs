use std::fs;
use std::io::Write;
use std::path::Path;

use super::frame::{encode_frame, parse_frame, CsiFrame};
use super::{IngestError, Result, FORMAT_VERSION, FRAME_LEN, HEADER_LEN, MAGIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CaptureHeader {
    pub version: u16,
    pub n_ant: u8,
    pub sample_rate_pps: u32,
    pub frame_count: u64,
}

impl CaptureHeader {
    pub fn new(n_ant: u8, sample_rate_pps: u32, frame_count: u64) -> Self {
        Self { version: FORMAT_VERSION, n_ant, sample_rate_pps, frame_count }
    }

    fn validate(&self) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(IngestError::UnsupportedVersion(self.version));
        }
        if !matches!(self.n_ant, 1 | 4) {
            return Err(IngestError::InvalidAntennaCount(self.n_ant));
        }
        Ok(())
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.push(self.n_ant);
        out.push(0);
        out.extend_from_slice(&self.sample_rate_pps.to_le_bytes());
        out.extend_from_slice(&self.frame_count.to_le_bytes());
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(IngestError::TruncatedFrame { need: HEADER_LEN, got: bytes.len() });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(IngestError::BadMagic(magic));
        }
        let header = Self {
            version: u16::from_le_bytes([bytes[4], bytes[5]]),
            n_ant: bytes[6],
            sample_rate_pps: u32::from_le_bytes(bytes[8..12].try_into().unwrap()),
            frame_count: u64::from_le_bytes(bytes[12..20].try_into().unwrap()),
        };
        header.validate()?;
        Ok(header)
    }
}

/// Serializes a capture. The header's `frame_count` must match `frames`.
pub fn encode_capture(header: &CaptureHeader, frames: &[CsiFrame]) -> Result<Vec<u8>> {
    header.validate()?;
    if header.frame_count != frames.len() as u64 {
        return Err(IngestError::FrameCountMismatch {
            declared: header.frame_count,
            found: frames.len() as u64,
        });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + frames.len() * FRAME_LEN);
    header.encode(&mut out);
    for f in frames {
        if f.antenna_id >= header.n_ant {
            return Err(IngestError::InvalidAntenna { antenna_id: f.antenna_id, n_ant: header.n_ant });
        }
        encode_frame(f, &mut out);
    }
    Ok(out)
}

pub fn decode_capture(bytes: &[u8]) -> Result<(CaptureHeader, Vec<CsiFrame>)> {
    let header = CaptureHeader::decode(bytes)?;
    let body = &bytes[HEADER_LEN..];
    let found = (body.len() / FRAME_LEN) as u64;
    if found != header.frame_count {
        return Err(IngestError::FrameCountMismatch { declared: header.frame_count, found });
    }
    if body.len() % FRAME_LEN != 0 {
        return Err(IngestError::TruncatedFrame { need: FRAME_LEN, got: body.len() % FRAME_LEN });
    }
    let frames = body
        .chunks_exact(FRAME_LEN)
        .map(|chunk| parse_frame(chunk, header.n_ant))
        .collect::<Result<Vec<_>>>()?;
    Ok((header, frames))
}

/// Reads a capture file; frames come back in file order.
pub fn read_capture(path: impl AsRef<Path>) -> Result<(CaptureHeader, Vec<CsiFrame>)> {
    decode_capture(&fs::read(path)?)
}

pub fn write_capture(path: impl AsRef<Path>, header: &CaptureHeader, frames: &[CsiFrame]) -> Result<()> {
    let bytes = encode_capture(header, frames)?;
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    file.sync_all()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    fn frames(n: usize, n_ant: u8) -> Vec<CsiFrame> {
        (0..n)
            .map(|i| {
                let sc = (0..256).map(|k| Complex::new((i + k) as f64, -(k as f64))).collect();
                CsiFrame::new(i as u64 * 5000, (i % usize::from(n_ant)) as u8, i as u16, sc).unwrap()
            })
            .collect()
    }

    #[test]
    fn write_then_read_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csi");
        let fr = frames(12, 4);
        let header = CaptureHeader::new(4, 200, 12);
        write_capture(&path, &header, &fr).unwrap();
        let (h, back) = read_capture(&path).unwrap();
        assert_eq!(h, header);
        assert_eq!(back, fr);
    }

    #[test]
    fn missing_frame_is_count_mismatch() {
        let fr = frames(100, 1);
        let mut bytes = encode_capture(&CaptureHeader::new(1, 200, 100), &fr).unwrap();
        bytes.truncate(bytes.len() - FRAME_LEN);
        assert!(matches!(
            decode_capture(&bytes),
            Err(IngestError::FrameCountMismatch { declared: 100, found: 99 })
        ));
    }

    #[test]
    fn partial_trailing_frame_is_truncated() {
        let fr = frames(3, 1);
        let mut bytes = encode_capture(&CaptureHeader::new(1, 200, 3), &fr).unwrap();
        bytes.truncate(bytes.len() - 5);
        assert!(decode_capture(&bytes).is_err());
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = encode_capture(&CaptureHeader::new(1, 200, 0), &[]).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_capture(&bytes), Err(IngestError::BadMagic(_))));
    }

    #[test]
    fn antenna_count_must_be_one_or_four() {
        assert!(matches!(
            encode_capture(&CaptureHeader::new(2, 200, 0), &[]),
            Err(IngestError::InvalidAntennaCount(2))
        ));
    }

    #[test]
    fn header_layout_is_bit_exact() {
        let bytes = encode_capture(&CaptureHeader::new(4, 200, 0), &[]).unwrap();
        assert_eq!(bytes, [b'C', b'S', b'I', b'1', 1, 0, 4, 0, 200, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
    }
}
