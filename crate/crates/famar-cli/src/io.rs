//! File formats: long-format panel CSV, response CSV, matrix CSV, and the
//! versioned fit metadata document.
//!
//! All numeric output uses the shortest round-trip representation, so values
//! written and re-parsed are bit-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use famar_core::mfm::UMode;
use famar_core::{DenseMatrix, MatrixPanel, Vector};

use crate::errors::{CliError, CliResult};

pub const METADATA_SCHEMA_VERSION: &str = "1";

/// Reads a long-format panel: header `sample_id,row,col,value`, every triple
/// exactly once, dense coverage of the shape implied by the maximum indices.
pub fn read_panel_csv(path: &Path) -> CliResult<MatrixPanel> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {}", path.display(), e)))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "sample_id,row,col,value" => {}
        Some((_, header)) => {
            return Err(CliError::input(format!(
                "{}: expected header 'sample_id,row,col,value', found '{}'",
                path.display(),
                header.trim()
            )))
        }
        None => return Err(CliError::input(format!("{}: empty file", path.display()))),
    }

    let mut cells: Vec<(usize, usize, usize, f64)> = Vec::new();
    let (mut n, mut rows, mut cols) = (0usize, 0usize, 0usize);
    for (line_no, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut field = |name: &str| {
            parts.next().ok_or_else(|| {
                CliError::input(format!(
                    "{}:{}: missing field '{}'",
                    path.display(),
                    line_no + 1,
                    name
                ))
            })
        };
        let sample: usize = parse_field(path, line_no, "sample_id", field("sample_id")?)?;
        let row: usize = parse_field(path, line_no, "row", field("row")?)?;
        let col: usize = parse_field(path, line_no, "col", field("col")?)?;
        let value: f64 = parse_field(path, line_no, "value", field("value")?)?;
        if !value.is_finite() {
            return Err(CliError::input(format!(
                "{}:{}: non-finite value at (sample {}, row {}, col {})",
                path.display(),
                line_no + 1,
                sample,
                row,
                col
            )));
        }
        n = n.max(sample + 1);
        rows = rows.max(row + 1);
        cols = cols.max(col + 1);
        cells.push((sample, row, col, value));
    }
    if cells.is_empty() {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }

    let mut seen = vec![false; n * rows * cols];
    let mut mats = vec![DenseMatrix::zeros(rows, cols); n];
    for (sample, row, col, value) in cells {
        let idx = (sample * rows + row) * cols + col;
        if seen[idx] {
            return Err(CliError::input(format!(
                "{}: duplicate cell (sample {}, row {}, col {})",
                path.display(),
                sample,
                row,
                col
            )));
        }
        seen[idx] = true;
        mats[sample][(row, col)] = value;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        let sample = missing / (rows * cols);
        let rest = missing % (rows * cols);
        return Err(CliError::input(format!(
            "{}: missing cell (sample {}, row {}, col {})",
            path.display(),
            sample,
            rest / cols,
            rest % cols
        )));
    }
    MatrixPanel::new(mats).map_err(CliError::from)
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line_no: usize,
    name: &str,
    raw: &str,
) -> CliResult<T> {
    raw.trim().parse().map_err(|_| {
        CliError::input(format!(
            "{}:{}: cannot parse {} from '{}'",
            path.display(),
            line_no + 1,
            name,
            raw
        ))
    })
}

pub fn write_panel_csv(path: &Path, panel: &MatrixPanel) -> CliResult<()> {
    let mut out = String::from("sample_id,row,col,value\n");
    for (i, m) in panel.iter().enumerate() {
        for row in 0..m.nrows() {
            for col in 0..m.ncols() {
                out.push_str(&format!("{},{},{},{}\n", i, row, col, m[(row, col)]));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Response CSV: header `sample_id,value`, one row per sample, contiguous ids
/// from zero.
pub fn read_response_csv(path: &Path) -> CliResult<Vector> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {}", path.display(), e)))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "sample_id,value" => {}
        Some((_, header)) => {
            return Err(CliError::input(format!(
                "{}: expected header 'sample_id,value', found '{}'",
                path.display(),
                header.trim()
            )))
        }
        None => return Err(CliError::input(format!("{}: empty file", path.display()))),
    }
    let mut pairs = Vec::new();
    for (line_no, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let sample: usize = parse_field(
            path,
            line_no,
            "sample_id",
            parts.next().unwrap_or_default(),
        )?;
        let value: f64 = parse_field(path, line_no, "value", parts.next().unwrap_or_default())?;
        pairs.push((sample, value));
    }
    pairs.sort_by_key(|&(s, _)| s);
    for (expect, &(s, _)) in pairs.iter().enumerate() {
        if s != expect {
            return Err(CliError::input(format!(
                "{}: sample ids must be dense from 0; {} is missing or duplicated",
                path.display(),
                expect
            )));
        }
    }
    Ok(Vector::from_iterator(pairs.len(), pairs.into_iter().map(|(_, v)| v)))
}

pub fn write_response_csv(path: &Path, y: &Vector) -> CliResult<()> {
    let mut out = String::from("sample_id,value\n");
    for (i, v) in y.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i, v));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Matrix CSV: header `row,col,value`, dense triplets.
pub fn write_matrix_csv(path: &Path, m: &DenseMatrix) -> CliResult<()> {
    let mut out = String::from("row,col,value\n");
    for row in 0..m.nrows() {
        for col in 0..m.ncols() {
            out.push_str(&format!("{},{},{}\n", row, col, m[(row, col)]));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> CliResult<DenseMatrix> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {}", path.display(), e)))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "row,col,value" => {}
        _ => {
            return Err(CliError::input(format!(
                "{}: expected header 'row,col,value'",
                path.display()
            )))
        }
    }
    let mut cells = Vec::new();
    let (mut rows, mut cols) = (0usize, 0usize);
    for (line_no, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let row: usize = parse_field(path, line_no, "row", parts.next().unwrap_or_default())?;
        let col: usize = parse_field(path, line_no, "col", parts.next().unwrap_or_default())?;
        let value: f64 = parse_field(path, line_no, "value", parts.next().unwrap_or_default())?;
        rows = rows.max(row + 1);
        cols = cols.max(col + 1);
        cells.push((row, col, value));
    }
    let mut m = DenseMatrix::zeros(rows, cols);
    for (row, col, value) in cells {
        m[(row, col)] = value;
    }
    Ok(m)
}

/// Versioned description of a fit, enough to reproduce predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitMetadata {
    pub schema_version: String,
    pub method: String,
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub k1: usize,
    pub k2: usize,
    pub lambda: f64,
    pub lambda_star: Option<f64>,
    pub folds: Option<usize>,
    pub iterations: usize,
    pub rank_b: usize,
    pub objective: f64,
    pub converged: bool,
    pub u_mode: Option<UMode>,
    pub demean: bool,
    pub c_s: Option<f64>,
    pub r_s: Option<f64>,
    pub y_mean: f64,
    pub seed: u64,
}

pub fn write_metadata(path: &Path, metadata: &FitMetadata) -> CliResult<()> {
    let mut file = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, metadata)?;
    writeln!(file)?;
    Ok(())
}

pub fn read_metadata(path: &Path) -> CliResult<FitMetadata> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {}", path.display(), e)))?;
    serde_json::from_str(&text).map_err(CliError::from)
}
