//! Field files: CSV (`node,value`) or flat little-endian `f64` binary, plus a
//! JSON grid header with the node table.

use serde::Serialize;
use std::io::{BufRead, Write};
use std::path::Path;

use super::grid::SphereGrid;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"CFLOWF64";

pub fn write_field_csv(path: &Path, f: &[f64]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "node,value")?;
    for (k, v) in f.iter().enumerate() {
        writeln!(w, "{k},{v:.17e}")?;
    }
    Ok(())
}

pub fn read_field_csv(path: &Path) -> Result<Vec<f64>> {
    let r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (ln, line) in r.lines().enumerate().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Grid(format!("{}:{}: expected node,value", path.display(), ln + 1)))?;
        let k: usize = k.trim().parse().map_err(|_| Error::Grid(format!("bad node index on line {}", ln + 1)))?;
        if k != out.len() {
            return Err(Error::Grid(format!("node {k} out of order on line {}", ln + 1)));
        }
        out.push(v.trim().parse().map_err(|_| Error::Grid(format!("bad value on line {}", ln + 1)))?);
    }
    Ok(out)
}

pub fn write_field_bin(path: &Path, f: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + 8 * f.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(f.len() as u64).to_le_bytes());
    for v in f {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_field_bin(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Grid(format!("{}: not a field file", path.display())));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if bytes.len() != 16 + 8 * n {
        return Err(Error::Grid(format!("{}: truncated field", path.display())));
    }
    Ok(bytes[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Reads either format, by extension (`.csv` or anything else as binary).
pub fn read_field(path: &Path) -> Result<Vec<f64>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_field_csv(path),
        _ => read_field_bin(path),
    }
}

#[derive(Serialize)]
struct GridHeader<'a> {
    n_lat: usize,
    n_lon: usize,
    nodes: usize,
    /// `[node, colatitude, longitude, weight]` rows.
    table: Vec<(usize, f64, f64, f64)>,
    marked: &'a [super::grid::MarkedCell],
}

pub fn grid_json(g: &SphereGrid) -> serde_json::Value {
    let table = (0..g.len())
        .map(|k| (k, g.theta[g.ring(k)], if g.n_lon == 1 { 0.0 } else { g.phi[k % g.n_lon] }, g.w(k)))
        .collect();
    serde_json::to_value(GridHeader { n_lat: g.n_lat, n_lon: g.n_lon, nodes: g.len(), table, marked: &g.marked })
        .expect("grid header serializes")
}
