//! Feature matrix dumps.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! b"CRSTCF1"  u32 rows  u32 cols  rows·cols × f32 (row-major)
//! ```

use std::io::{Read, Write};

use super::{DspError, FeatureMatrix, Result};

pub const FEATURE_MAGIC: &[u8; 7] = b"CRSTCF1";

pub fn write_matrix_bin<W: Write>(mut w: W, m: &FeatureMatrix) -> Result<()> {
    let rows = u32::try_from(m.rows).map_err(|_| DspError::Format("too many rows".into()))?;
    let cols = u32::try_from(m.cols).map_err(|_| DspError::Format("too many columns".into()))?;
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    let mut bytes = Vec::with_capacity(m.data.len() * 4);
    for &v in &m.data {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn read_matrix_bin<R: Read>(mut r: R) -> Result<FeatureMatrix> {
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)
        .map_err(|_| DspError::Format("truncated header".into()))?;
    if &magic != FEATURE_MAGIC {
        return Err(DspError::Format("bad magic".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)
        .map_err(|_| DspError::Format("truncated header".into()))?;
    let rows = u32::from_le_bytes(word) as usize;
    r.read_exact(&mut word)
        .map_err(|_| DspError::Format("truncated header".into()))?;
    let cols = u32::from_le_bytes(word) as usize;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| DspError::Format("matrix size overflows".into()))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != n * 4 {
        return Err(DspError::Format(format!(
            "expected {} payload bytes for {rows} x {cols}, found {}",
            n * 4,
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    FeatureMatrix::new(rows, cols, data)
}

/// Headerless CSV, one row per frame.
pub fn write_matrix_csv<W: Write>(w: W, m: &FeatureMatrix) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in m.iter_rows() {
        out.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| DspError::Format(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(r: R) -> Result<FeatureMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DspError::Format(e.to_string()))?;
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(DspError::Format(format!("row {rows} has {} columns", rec.len())));
        }
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| DspError::Format(format!("row {rows}: `{field}` is not a number")))?;
            data.push(v);
        }
        rows += 1;
    }
    FeatureMatrix::new(rows, cols.unwrap_or(0), data)
}
