//! Matrix and vector files: headerless CSV and the `HIBLKv01` binary format.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HIBLKv01";

/// Parses row-major headerless CSV. Every row must have the same length.
pub fn read_csv_matrix<R: Read>(input: R) -> Result<DMatrix<f64>> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        if cols.is_some_and(|c| c != rec.len()) {
            return Err(Error::Format(format!(
                "row {} has {} fields, expected {}",
                rows + 1,
                rec.len(),
                cols.unwrap_or(0)
            )));
        }
        cols = Some(rec.len());
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Format(format!("row {}: `{field}` is not a number", rows + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Format("empty matrix file".into()))?;
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn write_csv_matrix<W: Write>(m: &DMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for r in m.row_iter() {
        w.write_record(r.iter().map(|v| format!("{v:e}")))
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Magic, then rows and columns as little-endian `u64`, then the entries as
/// little-endian `f64` in row-major order.
pub fn write_binary_matrix<W: Write>(m: &DMatrix<f64>, mut out: W) -> Result<()> {
    let io = |e: std::io::Error| Error::Format(e.to_string());
    out.write_all(MAGIC).map_err(io)?;
    out.write_all(&(m.nrows() as u64).to_le_bytes()).map_err(io)?;
    out.write_all(&(m.ncols() as u64).to_le_bytes()).map_err(io)?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.write_all(&m[(i, j)].to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn read_binary_matrix<R: Read>(mut input: R) -> Result<DMatrix<f64>> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf).map_err(|e| Error::Format(e.to_string()))?;
    if buf.len() < 24 || &buf[..8] != MAGIC {
        return Err(Error::Format("missing HIBLKv01 header".into()));
    }
    let dim = |at: usize| u64::from_le_bytes(buf[at..at + 8].try_into().expect("8 bytes")) as usize;
    let (rows, cols) = (dim(8), dim(16));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format("matrix dimensions overflow".into()))?;
    let body = &buf[24..];
    if body.len() != expected {
        return Err(Error::Format(format!(
            "{rows}x{cols} matrix needs {expected} payload bytes, found {}",
            body.len()
        )));
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// Reads either format, detected by the magic bytes.
pub fn read_matrix<R: Read>(mut input: R) -> Result<DMatrix<f64>> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf).map_err(|e| Error::Format(e.to_string()))?;
    if buf.starts_with(MAGIC) {
        read_binary_matrix(buf.as_slice())
    } else {
        read_csv_matrix(buf.as_slice())
    }
}
