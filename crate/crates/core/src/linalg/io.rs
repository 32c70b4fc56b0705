//! Matrix file formats.
//!
//! Text: a `rows cols` header line followed by `rows` lines of `cols`
//! whitespace-separated decimals. Binary: the magic `DMAT`, `rows` and `cols`
//! as little-endian `u64`, then the entries row by row as little-endian `f64`.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use super::Matrix;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"DMAT";

fn validate(m: Matrix) -> Result<Matrix> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Parse(format!(
            "matrix must have at least one row and column, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("non-finite entry at storage position {pos}")));
    }
    Ok(m)
}

pub fn parse_text(text: &str) -> Result<Matrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(format!("bad header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("header must be `rows cols`, got {header:?}")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("expected {rows} rows, found {r}")))?;
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|e| Error::Parse(format!("row {r}: bad number {tok:?}: {e}")))?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::Parse(format!(
                "row {r} has {} entries, expected {cols}",
                data.len() - before
            )));
        }
    }
    if lines.next().is_some() {
        return Err(Error::Parse(format!("more than {rows} rows in matrix file")));
    }
    validate(Matrix::from_row_slice(rows, cols, &data))
}

pub fn format_text(m: &Matrix) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < 20 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Parse("missing DMAT header".into()));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Parse("matrix dimensions overflow".into()))?;
    let body = &bytes[20..];
    if body.len() != expected {
        return Err(Error::Parse(format!(
            "binary payload has {} bytes, expected {expected} for {rows}x{cols}",
            body.len()
        )));
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    validate(Matrix::from_row_slice(rows, cols, &data))
}

pub fn encode_binary(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * m.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for row in m.row_iter() {
        for v in row.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Reads either format, detected by the `DMAT` magic.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let mut bytes = Vec::new();
    fs::File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Parse("matrix file is neither DMAT nor UTF-8 text".into()))?;
        parse_text(&text)
    }
}

pub fn write_binary(path: impl AsRef<Path>, m: &Matrix) -> io::Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    f.write_all(&encode_binary(m))?;
    f.flush()
}

pub fn write_text(path: impl AsRef<Path>, m: &Matrix) -> io::Result<()> {
    fs::write(path, format_text(m))
}
