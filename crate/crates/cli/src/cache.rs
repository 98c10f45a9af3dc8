//! Binary cache of kernel pair tables.
//!
//! Layout, all little-endian f64: header `[dim, n_x, n_y, s, p]` (n_y = 1 in
//! one dimension), then the row-major `n × n` pair table. The exterior
//! densities are recomputed on load. File names carry the grid digest and
//! the bit patterns of s and p.

use std::path::{Path, PathBuf};

use mixeig_core::{Grid, KernelWeights};

use crate::error::{CliError, CliResult};

const HEADER: usize = 5;

pub fn file_name(grid: &Grid, s: f64, p: f64) -> String {
    format!("kernel-{:016x}-{:016x}-{:016x}.bin", grid.digest(), s.to_bits(), p.to_bits())
}

fn header(grid: &Grid, s: f64, p: f64) -> [f64; HEADER] {
    let n = grid.n_per_axis();
    [grid.dim() as f64, n[0] as f64, n.get(1).copied().unwrap_or(1) as f64, s, p]
}

pub fn encode(grid: &Grid, kernel: &KernelWeights) -> Vec<u8> {
    let head = header(grid, kernel.s(), kernel.p());
    let mut out = Vec::with_capacity(8 * (HEADER + kernel.table().len()));
    for v in head.iter().chain(kernel.table()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// `None` if the bytes do not hold a table for this grid, s and p.
pub fn decode(bytes: &[u8], grid: &Grid, s: f64, p: f64) -> CliResult<Option<KernelWeights>> {
    let n = grid.len();
    if bytes.len() != 8 * (HEADER + n * n) {
        return Ok(None);
    }
    let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    let want = header(grid, s, p);
    if values[..HEADER].iter().zip(&want).any(|(a, b)| a.to_bits() != b.to_bits()) {
        return Ok(None);
    }
    Ok(Some(KernelWeights::from_table(grid, s, p, values[HEADER..].to_vec())?))
}

/// Loads the table from `dir` or builds it and stores it there.
pub fn load_or_build(dir: &Path, grid: &Grid, s: f64, p: f64) -> CliResult<(KernelWeights, bool)> {
    let path: PathBuf = dir.join(file_name(grid, s, p));
    if path.exists() {
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        if let Some(k) = decode(&bytes, grid, s, p)? {
            return Ok((k, true));
        }
    }
    let kernel = KernelWeights::build(grid, s, p)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    crate::format::write_file(&path, &encode(grid, &kernel))?;
    Ok((kernel, false))
}
