//! `PXMT` matrix files and `PXKS` key-share blocks (little-endian).

use std::fs;
use std::path::Path;

use super::projection::ProjectionMatrix;
use crate::error::{Error, Result};

pub const MATRIX_MAGIC: &[u8; 4] = b"PXMT";
pub const MATRIX_VERSION: u32 = 1;
pub const SHARE_MAGIC: &[u8; 4] = b"PXKS";

pub fn encode_matrix(m: &ProjectionMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * m.data.len());
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.class_index as u32).to_le_bytes());
    out.extend_from_slice(&(m.dim as u32).to_le_bytes());
    for v in &m.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn f64s(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect()
}

pub fn decode_matrix(bytes: &[u8]) -> Result<ProjectionMatrix<f64>> {
    if bytes.len() < 16 || &bytes[..4] != MATRIX_MAGIC {
        return Err(Error::format("PXMT", "bad magic or truncated header"));
    }
    let version = u32_at(bytes, 4);
    if version != MATRIX_VERSION {
        return Err(Error::format("PXMT", format!("unsupported version {version}")));
    }
    let class_index = u32_at(bytes, 8) as usize;
    let dim = u32_at(bytes, 12) as usize;
    if bytes.len() != 16 + 8 * dim * dim {
        return Err(Error::format("PXMT", "payload length does not match dimension"));
    }
    ProjectionMatrix::from_rows(class_index, dim, f64s(&bytes[16..]))
}

pub fn encode_share(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * values.len());
    out.extend_from_slice(SHARE_MAGIC);
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_share(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() < 12 || &bytes[..4] != SHARE_MAGIC {
        return Err(Error::format("PXKS", "bad magic or truncated header"));
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    if bytes.len() != 12 + 8 * n {
        return Err(Error::format("PXKS", "payload length does not match header"));
    }
    Ok(f64s(&bytes[12..]))
}

pub fn save_matrix(m: &ProjectionMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &encode_matrix(m))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<ProjectionMatrix<f64>> {
    let path = path.as_ref();
    decode_matrix(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn save_share(values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &encode_share(values))
}

pub fn load_share(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    decode_share(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub(crate) fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
