//! Binary field files: magic `FSLB1`, `u8` N, `u32` M, `f64` L, then `M^N`
//! little-endian `f64` samples in row-major order.

use std::fs;
use std::path::Path;

use super::{Field, Grid};
use crate::error::{LabError, Result};

pub const MAGIC: &[u8; 5] = b"FSLB1";
const HEADER_LEN: usize = 5 + 1 + 4 + 8;

pub fn encode(u: &Field) -> Vec<u8> {
    let g = u.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.push(g.dim() as u8);
    out.extend_from_slice(&(g.points_per_axis() as u32).to_le_bytes());
    out.extend_from_slice(&g.extent().to_le_bytes());
    for v in u.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Field> {
    if bytes.len() < HEADER_LEN {
        return Err(LabError::Format(format!(
            "field file has {} bytes, header alone needs {HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[..5] != MAGIC {
        return Err(LabError::Format("bad magic, expected FSLB1".into()));
    }
    let dim = bytes[5] as usize;
    let m = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let extent = f64::from_le_bytes(bytes[10..18].try_into().expect("8 bytes"));
    let grid = Grid::new(dim, m, extent).map_err(|e| LabError::Format(e.to_string()))?;
    let expected = HEADER_LEN + 8 * grid.len();
    if bytes.len() != expected {
        return Err(LabError::Format(format!(
            "field file has {} bytes, expected exactly {expected}",
            bytes.len()
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Field::new(grid, values).map_err(|e| LabError::Format(e.to_string()))
}

pub fn write_field(path: &Path, u: &Field) -> Result<()> {
    fs::write(path, encode(u)).map_err(|e| LabError::io(path, e))
}

pub fn read_field(path: &Path) -> Result<Field> {
    let bytes = fs::read(path).map_err(|e| LabError::io(path, e))?;
    decode(&bytes)
}
