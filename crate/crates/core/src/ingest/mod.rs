//! Canonical CSI capture container.
//!
//! All integers are little-endian.
//!
//! ```text
//! header (20 bytes)
//!   0   magic            "CSI1"
//!   4   version          u16
//!   6   n_ant            u8   (1 or 4)
//!   7   pad              u8   (0)
//!   8   sample_rate_pps  u32
//!   12  frame_count      u64
//! frame (1036 bytes), repeated frame_count times
//!   0   timestamp_us     u64
//!   8   seq_no           u16
//!   10  antenna_id       u8
//!   11  pad              u8   (0)
//!   12  256 x (real i16, imag i16)
//! ```

mod adapter;
mod capture;
mod frame;

pub use adapter::{import_raw, AntennaOrdering, FieldSpec, ImportLayout};
pub use capture::{decode_capture, encode_capture, read_capture, write_capture, CaptureHeader};
pub use frame::{encode_frame, group_by_antenna, parse_frame, seq_precedes, CsiFrame};

pub const MAGIC: [u8; 4] = *b"CSI1";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 20;
pub const FRAME_HEADER_LEN: usize = 12;
pub const N_SUBCARRIERS: usize = 256;
pub const FRAME_LEN: usize = FRAME_HEADER_LEN + N_SUBCARRIERS * 4;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("frame truncated: need {need} bytes, got {got}")]
    TruncatedFrame { need: usize, got: usize },
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("antenna id {antenna_id} out of range for n_ant={n_ant}")]
    InvalidAntenna { antenna_id: u8, n_ant: u8 },
    #[error("unsupported antenna count {0} (expected 1 or 4)")]
    InvalidAntennaCount(u8),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("header declares {declared} frames but {found} are present")]
    FrameCountMismatch { declared: u64, found: u64 },
    #[error("subcarrier vector has {0} entries, expected 256")]
    BadSubcarrierCount(usize),
    #[error("import layout: {0}")]
    Layout(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IngestError>;
