use num_complex::Complex;

use super::{IngestError, Result, FRAME_HEADER_LEN, FRAME_LEN, N_SUBCARRIERS};

/// One received packet's channel estimate.
///
/// Subcarrier values hold the captured fixed-point I/Q counts as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFrame {
    pub timestamp_us: u64,
    pub antenna_id: u8,
    pub seq_no: u16,
    pub subcarriers: Vec<Complex<f64>>,
}

impl CsiFrame {
    pub fn new(timestamp_us: u64, antenna_id: u8, seq_no: u16, subcarriers: Vec<Complex<f64>>) -> Result<Self> {
        if subcarriers.len() != N_SUBCARRIERS {
            return Err(IngestError::BadSubcarrierCount(subcarriers.len()));
        }
        Ok(Self { timestamp_us, antenna_id, seq_no, subcarriers })
    }
}

/// Parses one frame from the front of `bytes`. Only the first [`FRAME_LEN`]
/// bytes are examined.
pub fn parse_frame(bytes: &[u8], n_ant: u8) -> Result<CsiFrame> {
    if bytes.len() < FRAME_LEN {
        return Err(IngestError::TruncatedFrame { need: FRAME_LEN, got: bytes.len() });
    }
    let b = &bytes[..FRAME_LEN];
    let timestamp_us = u64::from_le_bytes(b[0..8].try_into().unwrap());
    let seq_no = u16::from_le_bytes([b[8], b[9]]);
    let antenna_id = b[10];
    if antenna_id >= n_ant {
        return Err(IngestError::InvalidAntenna { antenna_id, n_ant });
    }
    let subcarriers = b[FRAME_HEADER_LEN..]
        .chunks_exact(4)
        .map(|iq| {
            let re = i16::from_le_bytes([iq[0], iq[1]]);
            let im = i16::from_le_bytes([iq[2], iq[3]]);
            Complex::new(f64::from(re), f64::from(im))
        })
        .collect();
    Ok(CsiFrame { timestamp_us, antenna_id, seq_no, subcarriers })
}

fn to_i16(x: f64) -> i16 {
    // saturating; NaN maps to 0
    x.round().clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16
}

/// Appends the wire encoding of `frame` to `out`. Subcarrier values are rounded
/// and saturated to the i16 range.
pub fn encode_frame(frame: &CsiFrame, out: &mut Vec<u8>) {
    out.reserve(FRAME_LEN);
    out.extend_from_slice(&frame.timestamp_us.to_le_bytes());
    out.extend_from_slice(&frame.seq_no.to_le_bytes());
    out.push(frame.antenna_id);
    out.push(0);
    for c in &frame.subcarriers {
        out.extend_from_slice(&to_i16(c.re).to_le_bytes());
        out.extend_from_slice(&to_i16(c.im).to_le_bytes());
    }
}

/// True when sequence number `a` comes before `b` under 16-bit modular order.
pub fn seq_precedes(a: u16, b: u16) -> bool {
    (b.wrapping_sub(a) as i16) > 0
}

/// Sorts by timestamp; within a run of equal timestamps, orders by signed
/// 16-bit distance from the run's first sequence number, which matches modular
/// order whenever the run spans less than half the sequence space.
fn sort_stream(g: &mut [CsiFrame]) {
    g.sort_by_key(|f| f.timestamp_us);
    let mut start = 0;
    while start < g.len() {
        let ts = g[start].timestamp_us;
        let end = start + g[start..].iter().take_while(|f| f.timestamp_us == ts).count();
        let reference = g[start].seq_no;
        g[start..end].sort_by_key(|f| f.seq_no.wrapping_sub(reference) as i16);
        start = end;
    }
}

/// Splits frames into one stream per antenna (index = antenna id), each sorted
/// by timestamp with ties broken by modular sequence order.
pub fn group_by_antenna(frames: &[CsiFrame], n_ant: u8) -> Result<Vec<Vec<CsiFrame>>> {
    let mut groups: Vec<Vec<CsiFrame>> = vec![Vec::new(); usize::from(n_ant)];
    for f in frames {
        if f.antenna_id >= n_ant {
            return Err(IngestError::InvalidAntenna { antenna_id: f.antenna_id, n_ant });
        }
        groups[usize::from(f.antenna_id)].push(f.clone());
    }
    for g in &mut groups {
        sort_stream(g);
    }
    Ok(groups)
}
