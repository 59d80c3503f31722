//! Plain-text matrix files.
//!
//! `MAT` files hold a dense square matrix: a header `MAT <d>` followed by `d`
//! rows. `PAIRMAT` files hold a matrix over canonical pair labels: a header
//! `PAIRMAT <R>`, a line with the pair count `C(R,2)`, then that many rows.
//! Values are whitespace-separated decimals. Lines starting with `#` are
//! comments. Numbers are written in Rust's shortest round-trip exponent form,
//! so a read after a write reproduces the matrix bit for bit.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::occupation::binomial;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, tag: &str) -> Result<usize> {
    let (no, line) = lines.next().ok_or_else(|| parse_err(0, format!("missing {tag} header")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(tag) {
        return Err(parse_err(no, format!("expected `{tag} <n>`")));
    }
    let n = parts
        .next()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| parse_err(no, format!("bad size in {tag} header")))?;
    if parts.next().is_some() {
        return Err(parse_err(no, "trailing tokens in header"));
    }
    Ok(n)
}

fn parse_rows<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, size: usize) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(size, size);
    for row in 0..size {
        let (no, line) = lines.next().ok_or_else(|| parse_err(0, format!("expected {size} rows, found {row}")))?;
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != size {
            return Err(parse_err(no, format!("expected {size} values, found {}", values.len())));
        }
        for (col, v) in values.iter().enumerate() {
            m[(row, col)] = v.parse::<f64>().map_err(|_| parse_err(no, format!("not a number: {v:?}")))?;
        }
    }
    if let Some((no, _)) = lines.next() {
        return Err(parse_err(no, "unexpected trailing data"));
    }
    Ok(m)
}

/// Parse a `MAT` document.
pub fn parse_mat(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = content_lines(text);
    let d = parse_header(&mut lines, "MAT")?;
    parse_rows(&mut lines, d)
}

/// Parse a `PAIRMAT` document, returning the mode count and the matrix.
pub fn parse_pairmat(text: &str) -> Result<(usize, DMatrix<f64>)> {
    let mut lines = content_lines(text);
    let r = parse_header(&mut lines, "PAIRMAT")?;
    let (no, line) = lines.next().ok_or_else(|| parse_err(0, "missing pair count"))?;
    let p: usize = line.parse().map_err(|_| parse_err(no, "bad pair count"))?;
    if p != binomial(r, 2) {
        return Err(parse_err(no, format!("pair count {p} != C({r},2) = {}", binomial(r, 2))));
    }
    Ok((r, parse_rows(&mut lines, p)?))
}

fn write_rows(out: &mut impl Write, m: &DMatrix<f64>) -> std::io::Result<()> {
    for row in 0..m.nrows() {
        let mut first = true;
        for col in 0..m.ncols() {
            if !first {
                out.write_all(b" ")?;
            }
            first = false;
            write!(out, "{:e}", m[(row, col)])?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Serialize a square matrix as `MAT`, with optional `#` comment lines first.
pub fn write_mat(out: &mut impl Write, m: &DMatrix<f64>, comments: &[&str]) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "MAT {}", m.nrows())?;
    write_rows(out, m)?;
    Ok(())
}

/// Serialize a pair-space matrix as `PAIRMAT`.
pub fn write_pairmat(out: &mut impl Write, modes: usize, m: &DMatrix<f64>) -> Result<()> {
    let p = binomial(modes, 2);
    if m.nrows() != p || m.ncols() != p {
        return Err(Error::Dimension(format!(
            "pair matrix is {}x{}, expected {p}x{p} for {modes} modes",
            m.nrows(),
            m.ncols()
        )));
    }
    writeln!(out, "PAIRMAT {modes}")?;
    writeln!(out, "{p}")?;
    write_rows(out, m)?;
    Ok(())
}

pub fn read_mat_file(path: &Path) -> Result<DMatrix<f64>> {
    parse_mat(&fs::read_to_string(path)?)
}

pub fn read_pairmat_file(path: &Path) -> Result<(usize, DMatrix<f64>)> {
    parse_pairmat(&fs::read_to_string(path)?)
}

pub fn write_mat_file(path: &Path, m: &DMatrix<f64>, comments: &[&str]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write_mat(&mut out, m, comments)?;
    out.flush()?;
    Ok(())
}

pub fn write_pairmat_file(path: &Path, modes: usize, m: &DMatrix<f64>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write_pairmat(&mut out, modes, m)?;
    out.flush()?;
    Ok(())
}
