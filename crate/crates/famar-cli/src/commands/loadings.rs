//! `famar loadings`: normalized, optionally varimax-rotated loading export.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use famar_core::sim::varimax::{varimax_criterion, varimax_with_rotation};
use famar_core::DenseMatrix;

use crate::errors::{CliError, CliResult};
use crate::io;
use crate::LoadingsArgs;

const VARIMAX_MAX_ITER: usize = 500;
const VARIMAX_TOL: f64 = 1e-10;

#[derive(Serialize)]
struct LoadingsSummary {
    schema_version: &'static str,
    rotated: bool,
    r_criterion: f64,
    c_criterion: f64,
    /// `||T'T - I||_F` of the two rotations; zero when not rotated.
    r_orthogonality_gap: f64,
    c_orthogonality_gap: f64,
}

fn normalize_columns(m: &DenseMatrix) -> CliResult<DenseMatrix> {
    let mut out = m.clone();
    for j in 0..out.ncols() {
        let norm = out.column(j).norm();
        if norm == 0.0 {
            return Err(CliError::estimation(format!("loading column {} is all zero", j)));
        }
        out.column_mut(j).unscale_mut(norm);
    }
    Ok(out)
}

fn process(m: &DenseMatrix, rotate: bool) -> CliResult<(DenseMatrix, f64)> {
    if rotate && m.ncols() >= 2 {
        let (rotated, t) = varimax_with_rotation(m, VARIMAX_MAX_ITER, VARIMAX_TOL)?;
        let gap = (t.transpose() * &t - DenseMatrix::identity(t.nrows(), t.ncols())).norm();
        Ok((rotated, gap))
    } else {
        Ok((normalize_columns(m)?, 0.0))
    }
}

pub fn run(args: LoadingsArgs) -> CliResult<i32> {
    let config = crate::config::RunConfig::load(args.config.as_ref())?;
    let rotate = !(args.no_rotate || config.no_rotate.unwrap_or(false));
    let out = args.out.or(config.out).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;

    let r_path = args.fit.join("r_hat.csv");
    let c_path = args.fit.join("c_hat.csv");
    if !r_path.exists() || !c_path.exists() {
        return Err(CliError::input(format!(
            "fit directory {} lacks loading artifacts r_hat.csv / c_hat.csv",
            args.fit.display()
        )));
    }
    let r_hat = io::read_matrix_csv(&r_path)?;
    let c_hat = io::read_matrix_csv(&c_path)?;

    let (r_out, r_gap) = process(&r_hat, rotate)?;
    let (c_out, c_gap) = process(&c_hat, rotate)?;
    io::write_matrix_csv(&out.join("r_loadings.csv"), &r_out)?;
    io::write_matrix_csv(&out.join("c_loadings.csv"), &c_out)?;

    let summary = LoadingsSummary {
        schema_version: "1",
        rotated: rotate,
        r_criterion: varimax_criterion(&r_out),
        c_criterion: varimax_criterion(&c_out),
        r_orthogonality_gap: r_gap,
        c_orthogonality_gap: c_gap,
    };
    let mut file = fs::File::create(out.join("loadings.json"))?;
    serde_json::to_writer_pretty(&mut file, &summary)?;
    writeln!(file)?;
    println!(
        "loadings: rotated={} criteria r={:.6} c={:.6}",
        rotate, summary.r_criterion, summary.c_criterion
    );
    Ok(0)
}
