//! `VRCK` parameter checkpoints.
//!
//! Layout (little-endian): magic `VRCK`, u32 version, u32 array count, then per
//! array a u32-length-prefixed UTF-8 name, u32 rank, u64 dims and the f64
//! payload in row-major order.

use std::fs;
use std::path::Path;

use crate::binio::{ByteReader, ByteWriter, FormatError};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VRCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl NamedArray {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            shape,
            values,
        }
    }

    pub fn from_tensor(name: impl Into<String>, t: &Tensor) -> Self {
        Self::new(name, t.shape().to_vec(), t.values().to_vec())
    }

    pub fn to_param(&self) -> Result<Tensor, FormatError> {
        Tensor::param(self.shape.clone(), self.values.clone()).map_err(|e| FormatError::Corrupt {
            offset: 0,
            reason: format!("array {:?}: {e}", self.name),
        })
    }
}

pub fn encode_checkpoint(arrays: &[NamedArray]) -> Vec<u8> {
    let mut w = ByteWriter::header(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
    w.u32(arrays.len() as u32);
    for a in arrays {
        w.string(&a.name);
        w.u32(a.shape.len() as u32);
        for &d in &a.shape {
            w.u64(d as u64);
        }
        w.f64s(&a.values);
    }
    w.into_bytes()
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<NamedArray>, FormatError> {
    let mut r = ByteReader::new(bytes);
    r.header(CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let count = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()?;
        let rank = r.count(rank as u64, 8)?;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let at = r.offset();
            let d = r.u64()?;
            shape.push(usize::try_from(d).map_err(|_| FormatError::Corrupt {
                offset: at,
                reason: format!("dimension {d} too large"),
            })?);
        }
        let at = r.offset();
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| FormatError::Corrupt {
                offset: at,
                reason: format!("shape {shape:?} overflows"),
            })?;
        let values = r.f64s(n)?;
        out.push(NamedArray { name, shape, values });
    }
    r.expect_end()?;
    Ok(out)
}

pub fn save_checkpoint(path: impl AsRef<Path>, arrays: &[NamedArray]) -> Result<(), FormatError> {
    fs::write(path, encode_checkpoint(arrays))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Vec<NamedArray>, FormatError> {
    decode_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<NamedArray> {
        vec![
            NamedArray::new("layer0.weight", vec![2, 3], vec![1.0, -0.0, 2.5, 1e-300, -7.25, 3.0]),
            NamedArray::new("scalar", vec![], vec![42.0]),
            NamedArray::new("empty", vec![0, 4], vec![]),
        ]
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let arrays = sample();
        let back = decode_checkpoint(&encode_checkpoint(&arrays)).unwrap();
        assert_eq!(back.len(), arrays.len());
        for (a, b) in arrays.iter().zip(&back) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
            let bits_a: Vec<u64> = a.values.iter().map(|x| x.to_bits()).collect();
            let bits_b: Vec<u64> = b.values.iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn every_truncation_is_a_structured_error() {
        let bytes = encode_checkpoint(&sample());
        for cut in 0..bytes.len() {
            let err = decode_checkpoint(&bytes[..cut]).unwrap_err();
            assert!(
                matches!(err, FormatError::Truncated { .. } | FormatError::Corrupt { .. }),
                "cut {cut}: {err:?}"
            );
        }
    }

    #[test]
    fn version_bump_is_rejected() {
        let mut bytes = encode_checkpoint(&sample());
        bytes[4] = 2;
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(FormatError::UnsupportedVersion { found: 2, .. })
        ));
    }
}
