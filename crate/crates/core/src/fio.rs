//! Framed binary file I/O.
//!
//! One container layout serves every binary artifact in the pipeline:
//! 4-byte magic, u32 little-endian header length, UTF-8 JSON header, then a
//! raw little-endian payload. Field tensors and observation sets use magic
//! `FLD1`, trained models use `MMGN`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FioError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("payload length mismatch: header implies {expected} bytes, found {found}")]
    PayloadLength { expected: usize, found: usize },
    #[error("file truncated while reading {0}")]
    Truncated(&'static str),
}

pub const FIELD_MAGIC: &[u8; 4] = b"FLD1";
pub const MODEL_MAGIC: &[u8; 4] = b"MMGN";

pub fn write_framed(
    path: &Path,
    magic: &[u8; 4],
    header_json: &str,
    payload: &[u8],
) -> Result<(), FioError> {
    let mut f = fs::File::create(path)?;
    f.write_all(magic)?;
    f.write_all(&(header_json.len() as u32).to_le_bytes())?;
    f.write_all(header_json.as_bytes())?;
    f.write_all(payload)?;
    Ok(())
}

/// Returns (header JSON, payload bytes).
pub fn read_framed(path: &Path, magic: &[u8; 4]) -> Result<(String, Vec<u8>), FioError> {
    let mut f = fs::File::open(path)?;
    let mut found = [0u8; 4];
    f.read_exact(&mut found)
        .map_err(|_| FioError::Truncated("magic"))?;
    if &found != magic {
        return Err(FioError::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(&found).into_owned(),
        });
    }
    let mut len_bytes = [0u8; 4];
    f.read_exact(&mut len_bytes)
        .map_err(|_| FioError::Truncated("header length"))?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    f.read_exact(&mut header_bytes)
        .map_err(|_| FioError::Truncated("header"))?;
    let header = String::from_utf8(header_bytes)
        .map_err(|e| FioError::BadHeader(format!("header is not UTF-8: {e}")))?;
    let mut payload = Vec::new();
    f.read_to_end(&mut payload)?;
    Ok((header, payload))
}

pub fn f64s_to_le_bytes(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn f64s_from_le_bytes(bytes: &[u8], expected: usize) -> Result<Vec<f64>, FioError> {
    if bytes.len() != expected * 8 {
        return Err(FioError::PayloadLength {
            expected: expected * 8,
            found: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn u32s_to_le_bytes(values: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn u32s_from_le_bytes(bytes: &[u8], expected: usize) -> Result<Vec<u32>, FioError> {
    if bytes.len() != expected * 4 {
        return Err(FioError::PayloadLength {
            expected: expected * 4,
            found: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
