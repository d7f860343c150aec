//! Field serialization: a small binary container (header + row-major 64-bit
//! floats, little endian) and a JSON variant for small grids. Round trips are
//! bit-exact in both formats.

use crate::grid::{BoxGrid, GridField};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"BIGF";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_binary<W: Write>(field: &GridField, mut w: W) -> Result<()> {
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(grid.points_per_axis() as u32).to_le_bytes())?;
    w.write_all(&grid.extent().to_le_bytes())?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<GridField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::MalformedFile("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != FORMAT_VERSION {
        return Err(Error::MalformedFile(format!("unsupported version {version}")));
    }
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let ppa = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let extent = f64::from_le_bytes(b8);
    let grid = BoxGrid::new(dim, extent, ppa)?;
    let mut values = Vec::with_capacity(grid.node_count());
    for _ in 0..grid.node_count() {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    GridField::from_values(grid, values)
}

/// JSON container for small grids. `values` are row-major nodal values;
/// serde_json emits shortest round-trip decimal so the bits survive.
#[derive(Serialize, Deserialize)]
pub struct FieldJson {
    pub format_version: u32,
    pub dim: usize,
    pub extent: f64,
    pub points_per_axis: usize,
    pub values: Vec<f64>,
}

pub fn to_json(field: &GridField) -> FieldJson {
    FieldJson {
        format_version: FORMAT_VERSION,
        dim: field.grid().dim(),
        extent: field.grid().extent(),
        points_per_axis: field.grid().points_per_axis(),
        values: field.values().to_vec(),
    }
}

pub fn from_json(j: &FieldJson) -> Result<GridField> {
    if j.format_version != FORMAT_VERSION {
        return Err(Error::MalformedFile(format!(
            "unsupported version {}",
            j.format_version
        )));
    }
    let grid = BoxGrid::new(j.dim, j.extent, j.points_per_axis)?;
    GridField::from_values(grid, j.values.clone())
}
