//! Raw tensor files: `MST1`, ndims (u8), dims (u32 each), then the values as
//! little-endian f32.

use maskcomp::tensor::Tensor;

use crate::error::{CliError, CliResult};

pub const TENSOR_MAGIC: [u8; 4] = *b"MST1";

pub fn write_tensor(t: &Tensor<f32>) -> CliResult<Vec<u8>> {
    let ndims = u8::try_from(t.shape().len())
        .map_err(|_| CliError::Config(format!("{} dimensions exceed 255", t.shape().len())))?;
    let mut out = Vec::with_capacity(5 + 4 * t.shape().len() + 4 * t.len());
    out.extend_from_slice(&TENSOR_MAGIC);
    out.push(ndims);
    for &dim in t.shape() {
        let dim = u32::try_from(dim).map_err(|_| CliError::Config(format!("dimension {dim} exceeds u32")))?;
        out.extend_from_slice(&dim.to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn read_tensor(bytes: &[u8]) -> CliResult<Tensor<f32>> {
    let bad = |m: String| CliError::Config(format!("invalid tensor file: {m}"));
    if bytes.len() < 5 || bytes[..4] != TENSOR_MAGIC {
        return Err(bad("missing MST1 header".into()));
    }
    let ndims = bytes[4] as usize;
    let dims_end = 5 + 4 * ndims;
    if bytes.len() < dims_end {
        return Err(bad("truncated dimensions".into()));
    }
    let shape: Vec<usize> = bytes[5..dims_end]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")) as usize)
        .collect();
    let len = shape
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
        .ok_or_else(|| bad("element count overflows".into()))?;
    let expected = (dims_end as u64).checked_add(len.saturating_mul(4));
    if expected != Some(bytes.len() as u64) {
        return Err(bad(format!("{} bytes for shape {shape:?}", bytes.len())));
    }
    let data = bytes[dims_end..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Tensor::new(shape, data).map_err(|e| bad(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let t = Tensor::new(vec![2, 3], vec![0.0f32, 1.5, -2.0, 3.25, 4.0, 5.0]).unwrap();
        let bytes = write_tensor(&t).unwrap();
        assert_eq!(bytes.len(), 5 + 8 + 24);
        assert_eq!(read_tensor(&bytes).unwrap(), t);
        assert!(read_tensor(&bytes[..bytes.len() - 1]).is_err());
        assert!(read_tensor(b"MST1").is_err());
        let mut nan = bytes.clone();
        nan[13..17].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(read_tensor(&nan).is_err());
    }
}
