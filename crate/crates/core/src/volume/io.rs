//! Raw little-endian payload plus a JSON sidecar header.
//!
//! A volume `foo` is stored as `foo.json`:
//!
//! ```json
//! {"dims": [nx, ny, nz], "spacing_mm": [sx, sy, sz], "dtype": "u32", "order": "x-fastest"}
//! ```
//!
//! and `foo.raw` holding `nx*ny*nz` little-endian values.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::grid::VoxelGrid;
use crate::error::{Error, Result};

pub const ORDER_X_FASTEST: &str = "x-fastest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub dtype: String,
    pub order: String,
}

/// Payload element with a fixed little-endian encoding.
pub trait VoxelType: Copy + Default + Send + Sync + 'static {
    const DTYPE: &'static str;
    const WIDTH: usize;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl VoxelType for u8 {
    const DTYPE: &'static str = "u8";
    const WIDTH: usize = 1;
    fn write_le(self, out: &mut Vec<u8>) {
        out.push(self);
    }
    fn read_le(bytes: &[u8]) -> Self {
        bytes[0]
    }
}

impl VoxelType for u32 {
    const DTYPE: &'static str = "u32";
    const WIDTH: usize = 4;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
    }
}

impl VoxelType for f32 {
    const DTYPE: &'static str = "f32";
    const WIDTH: usize = 4;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
    }
}

/// Returns the `(header, payload)` paths for a volume path given with or
/// without a `.json`/`.raw` extension.
pub fn volume_paths(path: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let path = path.as_ref();
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("raw") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut header = stem.clone().into_os_string();
    header.push(".json");
    let mut raw = stem.into_os_string();
    raw.push(".raw");
    (header.into(), raw.into())
}

pub fn encode<V: VoxelType>(grid: &VoxelGrid<V>) -> (VolumeHeader, Vec<u8>) {
    let header = VolumeHeader {
        dims: grid.dims(),
        spacing_mm: grid.spacing(),
        dtype: V::DTYPE.to_string(),
        order: ORDER_X_FASTEST.to_string(),
    };
    let mut bytes = Vec::with_capacity(grid.len() * V::WIDTH);
    for &v in grid.data() {
        v.write_le(&mut bytes);
    }
    (header, bytes)
}

pub fn decode<V: VoxelType>(header: &VolumeHeader, bytes: &[u8]) -> Result<VoxelGrid<V>> {
    if header.dtype != V::DTYPE {
        return Err(Error::InvalidGrid(format!(
            "expected dtype {}, header says {}",
            V::DTYPE,
            header.dtype
        )));
    }
    if header.order != ORDER_X_FASTEST {
        return Err(Error::InvalidGrid(format!("unsupported order {:?}", header.order)));
    }
    let n: usize = header.dims.iter().product();
    if bytes.len() != n * V::WIDTH {
        return Err(Error::InvalidGrid(format!(
            "payload is {} bytes, expected {}",
            bytes.len(),
            n * V::WIDTH
        )));
    }
    let data = bytes.chunks_exact(V::WIDTH).map(V::read_le).collect();
    VoxelGrid::from_vec(header.dims, header.spacing_mm, data)
}

pub fn write_volume<V: VoxelType>(path: impl AsRef<Path>, grid: &VoxelGrid<V>) -> Result<()> {
    let (header_path, raw_path) = volume_paths(path);
    let (header, bytes) = encode(grid);
    fs::write(&raw_path, bytes)?;
    let mut f = fs::File::create(&header_path)?;
    serde_json::to_writer_pretty(&mut f, &header)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_header(path: impl AsRef<Path>) -> Result<VolumeHeader> {
    let (header_path, _) = volume_paths(path);
    Ok(serde_json::from_slice(&fs::read(header_path)?)?)
}

pub fn read_volume<V: VoxelType>(path: impl AsRef<Path>) -> Result<VoxelGrid<V>> {
    let (header_path, raw_path) = volume_paths(path);
    let header: VolumeHeader = serde_json::from_slice(&fs::read(header_path)?)?;
    decode(&header, &fs::read(raw_path)?)
}
