//! Matrix export formats.
//!
//! CSV is row-major, one matrix row per line, values written with Rust's
//! shortest round-trip float formatting. The binary format is the magic
//! `SCS1`, then rows and cols as little-endian `u64`, then the entries as
//! little-endian `f64` in row-major order.

use std::io::{BufRead, Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"SCS1";

pub fn write_csv<W: Write>(m: &DMatrix<f64>, mut out: W) -> Result<()> {
    for i in 0..m.nrows() {
        let line = m
            .row(i)
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a CSV matrix. Blank lines and lines starting with `#` are skipped;
/// fields may be separated by commas or whitespace.
pub fn read_csv<R: BufRead>(input: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {s:?}: {e}", lineno + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!(
                    "line {}: expected {} fields, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Format("empty matrix".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Reads a vector from CSV: any arrangement of numbers, taken in reading
/// order.
pub fn read_vector<R: BufRead>(input: R) -> Result<Vec<f64>> {
    let m = read_csv(input)?;
    Ok(m.transpose().as_slice().to_vec())
}

pub fn write_vector<W: Write>(v: &[f64], mut out: W) -> Result<()> {
    for x in v {
        writeln!(out, "{x}")?;
    }
    Ok(())
}

pub fn write_binary<W: Write>(m: &DMatrix<f64>, mut out: W) -> Result<()> {
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&(m.nrows() as u64).to_le_bytes())?;
    out.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for v in m.row(i).iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<DMatrix<f64>> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let len = rows
        .checked_mul(cols)
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Format(format!("bad dimensions {rows}x{cols}")))?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        input.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after matrix data".into()));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}
