//! Binary snapshot files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "PELB" | version: u32 = 1 | n: u8 | N: u8 | boundary: u8 (0 periodic, 1 dirichlet)
//! | sizes: n x u64 | h: f64 | t: f64 | N * prod(sizes) x f64
//! ```
//!
//! Values are component-major, then row-major over the grid.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::grid::{Boundary, FieldState, GridError, GridSpec};

pub const MAGIC: &[u8; 4] = b"PELB";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic bytes {0:?}")]
    Magic([u8; 4]),
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("unknown boundary code {0}")]
    BoundaryCode(u8),
    #[error("{0} trailing bytes after the last value")]
    Trailing(usize),
    #[error("too many components ({0}) for the u8 header field")]
    Components(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
}

pub fn encode(state: &FieldState) -> Result<Vec<u8>, SnapshotError> {
    let grid = state.grid();
    let n_comp = u8::try_from(state.components())
        .map_err(|_| SnapshotError::Components(state.components()))?;
    let mut out = Vec::with_capacity(32 + 8 * (grid.dim() + state.values().len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(grid.dim() as u8);
    out.push(n_comp);
    out.push(grid.boundary().code());
    for &s in grid.sizes() {
        out.extend_from_slice(&(s as u64).to_le_bytes());
    }
    out.extend_from_slice(&grid.h().to_le_bytes());
    out.extend_from_slice(&state.t().to_le_bytes());
    for v in state.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn write<W: Write>(mut w: W, state: &FieldState) -> Result<(), SnapshotError> {
    w.write_all(&encode(state)?)?;
    Ok(())
}

/// Reads one snapshot. Dirichlet boundary values are recovered from the
/// first boundary point of each component.
pub fn read<R: Read>(mut r: R) -> Result<FieldState, SnapshotError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SnapshotError::Magic(magic));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(SnapshotError::Version(version));
    }
    let [n, components, code] = read_array::<3, _>(&mut r)?;
    let boundary = Boundary::from_code(code).ok_or(SnapshotError::BoundaryCode(code))?;
    let mut sizes = Vec::with_capacity(n as usize);
    for _ in 0..n {
        sizes.push(u64::from_le_bytes(read_array(&mut r)?) as usize);
    }
    let h = f64::from_le_bytes(read_array(&mut r)?);
    let t = f64::from_le_bytes(read_array(&mut r)?);
    let grid = GridSpec::new(&sizes, h, boundary)?;
    let count = grid.len() * components as usize;
    let mut raw = vec![0u8; count * 8];
    r.read_exact(&mut raw)?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(SnapshotError::Trailing(rest.len()));
    }
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let boundary_values = match boundary {
        Boundary::Periodic => None,
        Boundary::Dirichlet => {
            let len = grid.len();
            Some(
                (0..components as usize)
                    .map(|c| values[c * len])
                    .collect::<Vec<_>>(),
            )
        }
    };
    Ok(FieldState::new(
        grid,
        components as usize,
        values,
        t,
        boundary_values,
    )?)
}

fn read_array<const K: usize, R: Read>(r: &mut R) -> io::Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)?;
    Ok(buf)
}
