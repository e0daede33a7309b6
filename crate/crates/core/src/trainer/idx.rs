//! Reader and writer for the IDX image/label container (unsigned-byte payloads).

use std::path::Path;

use super::data::Dataset;
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(path, offset as u64, format!("truncated header: file has {} bytes", bytes.len())))
}

fn check_magic(bytes: &[u8], want: u32, path: &Path) -> Result<()> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != want {
        return Err(Error::format(
            path,
            0,
            format!("bad magic 0x{magic:08x}, expected 0x{want:08x}"),
        ));
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], offset: usize, len: usize, path: &Path) -> Result<&'a [u8]> {
    let have = bytes.len().saturating_sub(offset);
    if have < len {
        return Err(Error::format(
            path,
            bytes.len() as u64,
            format!("truncated payload: expected {len} bytes from offset {offset}, found {have}"),
        ));
    }
    if have > len {
        return Err(Error::format(path, (offset + len) as u64, format!("{} trailing bytes", have - len)));
    }
    Ok(&bytes[offset..])
}

/// Images as `(count, rows, cols, pixels scaled to [0, 1])`.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<f32>)> {
    check_magic(bytes, IDX_IMAGES_MAGIC, path)?;
    let n = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let len = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::format(path, 4, "image dimensions overflow"))?;
    let data = payload(bytes, 16, len, path)?;
    Ok((n, rows, cols, data.iter().map(|&b| b as f32 / 255.0).collect()))
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    check_magic(bytes, IDX_LABELS_MAGIC, path)?;
    let n = be_u32(bytes, 4, path)? as usize;
    Ok(payload(bytes, 8, n, path)?.to_vec())
}

/// Loads an image file and its label file; classes = largest label + 1.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images.as_ref(), labels.as_ref());
    let ib = std::fs::read(ip).map_err(|e| Error::io(ip, e))?;
    let lb = std::fs::read(lp).map_err(|e| Error::io(lp, e))?;
    let (n, rows, cols, pixels) = parse_idx_images(&ib, ip)?;
    let labels = parse_idx_labels(&lb, lp)?;
    if labels.len() != n {
        return Err(Error::format(
            lp,
            4,
            format!("label count {} does not match image count {n}", labels.len()),
        ));
    }
    let classes = labels.iter().copied().max().map_or(1, |m| m as usize + 1).max(2);
    Dataset::new(pixels, labels.into_iter().map(usize::from).collect(), 1, rows, cols, classes)
}

pub fn encode_idx_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let n = if rows * cols == 0 { 0 } else { pixels.len() / (rows * cols) };
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
