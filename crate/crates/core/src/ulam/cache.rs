//! Binary operator cache: a header followed by row-major entries, little-endian.
//!
//! Header: magic `ULAMOP\0\x01`, format version (u32), map hash (u64),
//! `log2 d` (u32), nonzero count (u64). Each row: entry count (u32), column
//! indices (u32 each), then `(midpoint f64, radius f32)` pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::mesh::Mesh;
use super::operator::{assemble, RowView, UlamOperator};
use crate::error::{Error, Result};
use crate::map_model::PiecewiseMap;

const MAGIC: &[u8; 8] = b"ULAMOP\0\x01";
const VERSION: u32 = 1;

pub fn cache_path(dir: &Path, map: &PiecewiseMap, mesh: Mesh) -> PathBuf {
    dir.join(format!("{:016x}_{}.ulam", map.hash(), mesh.log2_d()))
}

pub fn save(path: &Path, op: &UlamOperator, map_hash: u64) -> Result<()> {
    let rows = op.to_rows();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&map_hash.to_le_bytes())?;
    w.write_all(&op.mesh().log2_d().to_le_bytes())?;
    w.write_all(&(op.nnz() as u64).to_le_bytes())?;
    for k in 0..op.d() {
        let (s, e) = (rows.row_ptr[k] as usize, rows.row_ptr[k + 1] as usize);
        w.write_all(&((e - s) as u32).to_le_bytes())?;
        for t in s..e {
            w.write_all(&rows.cols[t].to_le_bytes())?;
        }
        for t in s..e {
            w.write_all(&rows.mid[t].to_le_bytes())?;
            w.write_all(&rows.rad[t].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| Error::Cache(format!("truncated cache file: {e}")))?;
    Ok(buf)
}

/// Loads a cached operator; row sums are re-verified.
pub fn load(path: &Path, map_hash: u64, mesh: Mesh) -> Result<UlamOperator> {
    let mut r = BufReader::new(File::open(path)?);
    if &read_array::<8>(&mut r)? != MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::Cache(format!("unsupported version {version}")));
    }
    let hash = u64::from_le_bytes(read_array(&mut r)?);
    let log2_d = u32::from_le_bytes(read_array(&mut r)?);
    if hash != map_hash || log2_d != mesh.log2_d() {
        return Err(Error::Cache("cache key does not match map and mesh".into()));
    }
    let nnz = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let d = mesh.d();
    if nnz > 64 * d {
        return Err(Error::Cache(format!("implausible nonzero count {nnz}")));
    }
    let mut rows = RowView {
        row_ptr: Vec::with_capacity(d + 1),
        cols: Vec::with_capacity(nnz),
        mid: Vec::with_capacity(nnz),
        rad: Vec::with_capacity(nnz),
    };
    rows.row_ptr.push(0);
    for _ in 0..d {
        let n = u32::from_le_bytes(read_array(&mut r)?) as usize;
        if rows.cols.len() + n > nnz {
            return Err(Error::Cache("row counts exceed header".into()));
        }
        for _ in 0..n {
            rows.cols.push(u32::from_le_bytes(read_array(&mut r)?));
        }
        for _ in 0..n {
            rows.mid.push(f64::from_le_bytes(read_array(&mut r)?));
            rows.rad.push(f32::from_le_bytes(read_array(&mut r)?));
        }
        rows.row_ptr.push(rows.cols.len() as u32);
    }
    if rows.cols.len() != nnz {
        return Err(Error::Cache("row counts do not match header".into()));
    }
    UlamOperator::from_rows(mesh, &rows)
}

/// Loads the operator from `dir` if cached there, else assembles and stores it.
pub fn assemble_cached(map: &PiecewiseMap, mesh: Mesh, dir: Option<&Path>) -> Result<UlamOperator> {
    let Some(dir) = dir else { return assemble(map, mesh) };
    let path = cache_path(dir, map, mesh);
    if path.is_file() {
        if let Ok(op) = load(&path, map.hash(), mesh) {
            return Ok(op);
        }
    }
    let op = assemble(map, mesh)?;
    std::fs::create_dir_all(dir)?;
    save(&path, &op, map.hash())?;
    Ok(op)
}
