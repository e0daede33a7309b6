//! Per-epoch weight files: `"AHSN"`, version u32 LE = 1, layer count u32 LE,
//! then per layer a u32 LE name length, the UTF-8 name, four u32 LE dims and
//! the row-major f32 LE payload.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::WeightTensor4D;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"AHSN";
pub const SNAPSHOT_VERSION: u32 = 1;

/// One conv weight as stored on disk, in 32-bit precision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotLayer {
    pub name: String,
    pub dims: [usize; 4],
    pub data: Vec<f32>,
}

impl SnapshotLayer {
    /// Promotes to 64-bit for analysis.
    pub fn to_tensor(&self) -> Result<WeightTensor4D> {
        WeightTensor4D::from_f32(self.name.clone(), self.dims, &self.data)
    }
}

pub fn to_tensors(layers: &[SnapshotLayer]) -> Result<Vec<WeightTensor4D>> {
    layers.iter().map(SnapshotLayer::to_tensor).collect()
}

pub fn encode_snapshot(layers: &[SnapshotLayer]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&u32_of(layers.len(), "layer count")?.to_le_bytes());
    for l in layers {
        let n: usize = l.dims.iter().product();
        if n != l.data.len() || l.dims.contains(&0) {
            return Err(Error::Validation(format!(
                "layer {} has dims {:?} but {} values",
                l.name,
                l.dims,
                l.data.len()
            )));
        }
        if l.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("layer {} has non-finite weights", l.name)));
        }
        out.extend_from_slice(&u32_of(l.name.len(), "name length")?.to_le_bytes());
        out.extend_from_slice(l.name.as_bytes());
        for d in l.dims {
            out.extend_from_slice(&u32_of(d, "dimension")?.to_le_bytes());
        }
        for v in &l.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Validation(format!("{what} {v} does not fit in 32 bits")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.path,
                self.pos as u64,
                format!("truncated {what}: need {n} bytes, {} left", self.bytes.len() - self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_snapshot(bytes: &[u8], path: &Path) -> Result<Vec<SnapshotLayer>> {
    let mut r = Reader { bytes, pos: 0, path };
    let magic = r.take(4, "magic")?;
    if magic != SNAPSHOT_MAGIC {
        return Err(Error::format(
            path,
            0,
            format!("bad magic {:?}, expected \"AHSN\"", String::from_utf8_lossy(magic)),
        ));
    }
    let version = r.u32("version")?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::format(path, 4, format!("unsupported version {version}")));
    }
    let count = r.u32("layer count")? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = r.u32("name length")? as usize;
        let at = r.pos;
        let name = std::str::from_utf8(r.take(name_len, "layer name")?)
            .map_err(|e| Error::format(path, at as u64, format!("layer name is not UTF-8: {e}")))?
            .to_string();
        let at = r.pos;
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = r.u32("dimensions")? as usize;
        }
        if dims.contains(&0) {
            return Err(Error::format(path, at as u64, format!("layer {name} has a zero dimension {dims:?}")));
        }
        let n = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(4).map(|_| n))
            .ok_or_else(|| Error::format(path, at as u64, "dimension product overflows"))?;
        let start = r.pos;
        let raw = r.take(n * 4, "weights")?;
        let mut data = Vec::with_capacity(n);
        for (i, c) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if !v.is_finite() {
                return Err(Error::format(
                    path,
                    (start + 4 * i) as u64,
                    format!("non-finite weight in layer {name}"),
                ));
            }
            data.push(v);
        }
        layers.push(SnapshotLayer { name, dims, data });
    }
    if r.pos != bytes.len() {
        return Err(Error::format(path, r.pos as u64, format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(layers)
}

pub fn write_snapshot(path: impl AsRef<Path>, layers: &[SnapshotLayer]) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_snapshot(layers)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<Vec<SnapshotLayer>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes, path)
}

/// File name used for epoch `epoch` (1-based) inside a snapshot directory.
pub fn snapshot_file_name(epoch: usize) -> String {
    format!("epoch_{epoch:03}.snap")
}

/// Writes `epochs[i]` to `dir/epoch_{i+1:03}.snap`, creating `dir` if needed.
pub fn write_snapshot_dir(dir: impl AsRef<Path>, epochs: &[Vec<SnapshotLayer>]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, layers) in epochs.iter().enumerate() {
        write_snapshot(dir.join(snapshot_file_name(i + 1)), layers)?;
    }
    Ok(())
}
