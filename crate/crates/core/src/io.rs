//! File formats: dense matrices (binary and CSV), embeddings, loss traces and
//! JSON sidecars describing where a matrix came from.

use std::io::{BufRead, Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::fe_distance::{DissimilarityMatrix, FeParams};
use crate::similarity::{Provenance, SimilarityMatrix};

/// Row-major little-endian `f64` values after an 8-byte header holding the
/// row and column counts as little-endian `u32`.
pub fn write_matrix_binary<W: Write>(mut w: W, m: &Array2<f64>) -> Result<()> {
    let (rows, cols) = m.dim();
    let too_big = |x: usize| u32::try_from(x).map_err(|_| Error::Validation(format!("dimension {x} exceeds u32")));
    w.write_all(&too_big(rows)?.to_le_bytes())?;
    w.write_all(&too_big(cols)?.to_le_bytes())?;
    let mut buf = Vec::with_capacity(cols * 8);
    for row in m.rows() {
        buf.clear();
        for &x in row {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_binary<R: Read>(mut r: R) -> Result<Array2<f64>> {
    let mut header = [0u8; 8];
    r.read_exact(&mut header)?;
    let rows = u32::from_le_bytes(header[..4].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[4..].try_into().unwrap()) as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != rows * cols * 8 {
        return validation(format!(
            "matrix body has {} bytes, expected {} for {rows}x{cols}",
            bytes.len(),
            rows * cols * 8
        ));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked"))
}

/// Comma-separated rows, no header.
pub fn write_matrix_csv<W: Write>(mut w: W, m: &Array2<f64>) -> Result<()> {
    let mut line = String::new();
    for row in m.rows() {
        line.clear();
        for (k, x) in row.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&x.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn parse_float(token: &str, line: usize) -> Result<f64> {
    token
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("not a number: {:?}", token.trim()) })
}

pub fn read_matrix_csv<R: BufRead>(r: R) -> Result<Array2<f64>> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line.split(',').map(|t| parse_float(t, k + 1)).collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Parse { line: k + 1, message: format!("expected {c} columns, found {}", row.len()) })
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, cols.unwrap_or(0)), values).expect("row lengths checked"))
}

/// First line `n d`, then one whitespace-separated row per node.
pub fn write_embedding<W: Write>(mut w: W, u: &Array2<f64>) -> Result<()> {
    writeln!(w, "{} {}", u.nrows(), u.ncols())?;
    let mut line = String::new();
    for row in u.rows() {
        line.clear();
        for (k, x) in row.iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            line.push_str(&x.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_embedding<R: BufRead>(r: R) -> Result<Array2<f64>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse { line: 1, message: format!("bad header {header:?}") }))
        .collect::<Result<_>>()?;
    let [n, d] = dims[..] else {
        return Err(Error::Parse { line: 1, message: "header must be `n d`".into() });
    };
    let mut values = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line.split_whitespace().map(|t| parse_float(t, k + 2)).collect::<Result<_>>()?;
        if row.len() != d {
            return Err(Error::Parse { line: k + 2, message: format!("expected {d} values, found {}", row.len()) });
        }
        values.extend(row);
        rows += 1;
    }
    if rows != n {
        return validation(format!("header announces {n} rows but {rows} were read"));
    }
    Ok(Array2::from_shape_vec((n, d), values).expect("row lengths checked"))
}

/// `iteration,psi` rows.
pub fn write_loss_trace<W: Write>(mut w: W, trace: &[f64]) -> Result<()> {
    writeln!(w, "iteration,psi")?;
    for (i, psi) in trace.iter().enumerate() {
        writeln!(w, "{i},{psi}")?;
    }
    w.flush()?;
    Ok(())
}

/// Metadata written next to a matrix file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub kind: MatrixKind,
    pub rows: usize,
    pub cols: usize,
    pub targets: Option<Vec<usize>>,
    pub symmetric: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fe_params: Option<FeParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Dissimilarity,
    Similarity,
}

impl MatrixSidecar {
    pub fn for_dissimilarity(d: &DissimilarityMatrix) -> Self {
        MatrixSidecar {
            kind: MatrixKind::Dissimilarity,
            rows: d.values.nrows(),
            cols: d.values.ncols(),
            targets: Some(d.targets.clone()),
            symmetric: d.symmetric,
            fe_params: d.params,
            iterations: d.params.map(|_| d.iterations),
            converged: d.params.map(|_| d.converged),
            provenance: None,
            shift: None,
            scale: None,
        }
    }

    pub fn for_similarity(s: &SimilarityMatrix) -> Self {
        MatrixSidecar {
            kind: MatrixKind::Similarity,
            rows: s.values.nrows(),
            cols: s.values.ncols(),
            targets: s.self_columns.clone(),
            symmetric: false,
            fe_params: None,
            iterations: None,
            converged: None,
            provenance: Some(s.provenance.clone()),
            shift: Some(s.shift),
            scale: Some(s.scale),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
