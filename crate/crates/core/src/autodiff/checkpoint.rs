//! Parameter checkpoints: a list of named matrices.
//!
//! ```text
//! magic   4 bytes "SRCK"
//! version u32 (1), count u32
//! per entry: name_len u32, name UTF-8, ndim u32 (2), dims ndim × u64, data f64 × product(dims)
//! ```
//! All integers and floats little-endian.

use std::fs;
use std::path::Path;

use crate::matrix::Matrix;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SRCK";

pub fn encode_checkpoint(params: &[(String, Matrix)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, m) in params {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&2u32.to_le_bytes());
        out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
        for v in m.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<(String, Matrix)>> {
    let mut pos = 0;
    let mut take = |len: usize| -> Result<&[u8]> {
        let end = pos + len;
        if end > bytes.len() {
            return Err(Error::input("checkpoint is truncated"));
        }
        let s = &bytes[pos..end];
        pos = end;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(Error::input("not a checkpoint file"));
    }
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
    if u32_at(take(4)?) != 1 {
        return Err(Error::input("unsupported checkpoint version"));
    }
    let count = u32_at(take(4)?) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u32_at(take(4)?) as usize;
        let name = String::from_utf8(take(len)?.to_vec())
            .map_err(|_| Error::input("checkpoint name is not UTF-8"))?;
        let ndim = u32_at(take(4)?);
        if ndim != 2 {
            return Err(Error::input(format!(
                "`{name}` has {ndim} dimensions, expected 2"
            )));
        }
        let rows = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let cols = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let total = rows
            .checked_mul(cols)
            .filter(|t| t.checked_mul(8).is_some())
            .ok_or_else(|| Error::input("checkpoint shape overflows"))?;
        let raw = take(total * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push((name, Matrix::from_vec(rows, cols, data)?));
    }
    if pos != bytes.len() {
        return Err(Error::input("trailing bytes after checkpoint"));
    }
    Ok(out)
}

pub fn save_checkpoint(path: &Path, params: &[(String, Matrix)]) -> Result<()> {
    fs::write(path, encode_checkpoint(params)).map_err(|e| Error::file(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, Matrix)>> {
    decode_checkpoint(&fs::read(path).map_err(|e| Error::file(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_file() {
        let params = vec![
            (
                "w1".to_string(),
                Matrix::from_rows(&[[1.0, -2.5], [0.0, 3.25]]).unwrap(),
            ),
            (
                "b1".to_string(),
                Matrix::from_rows(&[[f64::MIN_POSITIVE]]).unwrap(),
            ),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &params).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), params);
    }

    #[test]
    fn corrupt_bytes_are_rejected() {
        let bytes = encode_checkpoint(&[("w".into(), Matrix::zeros(2, 2))]);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_checkpoint(b"XXXX").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_checkpoint(&extra).is_err());
    }
}
