//! `TNS1` tensor container: `"TNS1" | rank u8 | rank x u64 dims | f32 payload`,
//! little-endian, row-major.

use std::path::Path;

use crate::Scalar;

pub const TENSOR_MAGIC: [u8; 4] = *b"TNS1";

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("bad tensor magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("tensor truncated: need {need} bytes, got {got}")]
    Truncated { need: usize, got: usize },
    #[error("dims {dims:?} imply {expected} values, payload has {got}")]
    SizeMismatch { dims: Vec<u64>, expected: usize, got: usize },
    #[error("rank {0} exceeds 255")]
    RankTooLarge(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u64>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new<S: Scalar>(dims: Vec<u64>, data: &[S]) -> Result<Self, TensorError> {
        let expected = dims.iter().product::<u64>() as usize;
        if expected != data.len() {
            return Err(TensorError::SizeMismatch { dims, expected, got: data.len() });
        }
        Ok(Self { dims, data: data.iter().map(|v| v.f64() as f32).collect() })
    }

    pub fn to_scalars<S: Scalar>(&self) -> Vec<S> {
        self.data.iter().map(|&v| S::of(f64::from(v))).collect()
    }

    pub fn encode(&self) -> Result<Vec<u8>, TensorError> {
        if self.dims.len() > 255 {
            return Err(TensorError::RankTooLarge(self.dims.len()));
        }
        let mut out = Vec::with_capacity(5 + 8 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(&TENSOR_MAGIC);
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, TensorError> {
        if bytes.len() < 5 {
            return Err(TensorError::Truncated { need: 5, got: bytes.len() });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != TENSOR_MAGIC {
            return Err(TensorError::BadMagic(magic));
        }
        let rank = usize::from(bytes[4]);
        let head = 5 + 8 * rank;
        if bytes.len() < head {
            return Err(TensorError::Truncated { need: head, got: bytes.len() });
        }
        let dims: Vec<u64> = bytes[5..head].chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        let expected = dims.iter().try_fold(1u64, |a, &d| a.checked_mul(d)).unwrap_or(u64::MAX);
        let payload = &bytes[head..];
        if payload.len() % 4 != 0 || (payload.len() / 4) as u64 != expected {
            return Err(TensorError::SizeMismatch { dims, expected: expected as usize, got: payload.len() / 4 });
        }
        let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { dims, data })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), TensorError> {
        std::fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, TensorError> {
        Self::decode(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_bit_exact() {
        let t = Tensor::new(vec![2], &[1.0f32, -2.0]).unwrap();
        let b = t.encode().unwrap();
        let mut want = b"TNS1".to_vec();
        want.push(1);
        want.extend_from_slice(&2u64.to_le_bytes());
        want.extend_from_slice(&1.0f32.to_le_bytes());
        want.extend_from_slice(&(-2.0f32).to_le_bytes());
        assert_eq!(b, want);
    }

    #[test]
    fn size_mismatch_rejected() {
        assert!(Tensor::new(vec![2, 3], &[0.0f64; 5]).is_err());
        let mut b = Tensor::new(vec![3], &[0.0f32; 3]).unwrap().encode().unwrap();
        b.pop();
        assert!(Tensor::decode(&b).is_err());
        b[0] = b'x';
        assert!(matches!(Tensor::decode(&b), Err(TensorError::BadMagic(_))));
    }

    proptest! {
        #[test]
        fn round_trip(dims in prop::collection::vec(0u64..5, 0..4), seed in any::<u64>()) {
            let n: u64 = dims.iter().product();
            let data: Vec<f32> = (0..n).map(|i| (i as f32) * 0.5 - (seed % 7) as f32).collect();
            let t = Tensor::new(dims, &data).unwrap();
            prop_assert_eq!(Tensor::decode(&t.encode().unwrap()).unwrap(), t);
        }

        #[test]
        fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
            let _ = Tensor::decode(&bytes);
        }
    }
}
