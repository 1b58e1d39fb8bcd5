//! `famar predict`: forward predictions from saved fit artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use famar_core::kernels::{unvectorize, vectorize};
use famar_core::mfm::{project_factors, ProjectionPair, UMode};
use famar_core::{DenseMatrix, MatrixPanel, Vector};

use crate::errors::{CliError, CliResult};
use crate::io::{self, FitMetadata};
use crate::PredictArgs;

struct LoadedFit {
    metadata: FitMetadata,
    a_hat: DenseMatrix,
    b_hat: DenseMatrix,
    projections: Option<ProjectionPair>,
    r_hat: Option<DenseMatrix>,
    c_hat: Option<DenseMatrix>,
    gamma_tilde: Option<DenseMatrix>,
    panel_mean: Option<DenseMatrix>,
}

fn load_fit(dir: &Path) -> CliResult<LoadedFit> {
    let metadata = io::read_metadata(&dir.join("metadata.json"))?;
    let a_hat = io::read_matrix_csv(&dir.join("a_hat.csv"))?;
    let b_hat = io::read_matrix_csv(&dir.join("b_hat.csv"))?;
    let optional = |name: &str| -> CliResult<Option<DenseMatrix>> {
        let path = dir.join(name);
        if path.exists() {
            Ok(Some(io::read_matrix_csv(&path)?))
        } else {
            Ok(None)
        }
    };
    let projections = match (optional("w1.csv")?, optional("w2.csv")?) {
        (Some(w1), Some(w2)) => Some(ProjectionPair::new(w1, w2)?),
        _ => None,
    };
    Ok(LoadedFit {
        metadata,
        a_hat,
        b_hat,
        projections,
        r_hat: optional("r_hat.csv")?,
        c_hat: optional("c_hat.csv")?,
        gamma_tilde: optional("gamma_tilde.csv")?,
        panel_mean: optional("panel_mean.csv")?,
    })
}

fn covariates(fit: &LoadedFit, panel: &MatrixPanel) -> CliResult<(MatrixPanel, MatrixPanel)> {
    let meta = &fit.metadata;
    if panel.rows() != meta.p1 || panel.cols() != meta.p2 {
        return Err(CliError::input(format!(
            "new panel is {}x{}, fit expects {}x{}",
            panel.rows(),
            panel.cols(),
            meta.p1,
            meta.p2
        )));
    }
    if meta.method == "baseline" {
        let empty = MatrixPanel::zeros(panel.len(), 0, 0)?;
        return Ok((empty, panel.clone()));
    }
    let proj = fit
        .projections
        .as_ref()
        .ok_or_else(|| CliError::input("fit artifacts lack projection matrices"))?;
    let centered = match &fit.panel_mean {
        Some(mean) => panel.shifted_by(mean)?,
        None => panel.clone(),
    };
    let f_new = project_factors(&centered, proj)?;
    let u_mode = meta.u_mode.unwrap_or(UMode::Kronecker);
    let u_new = match u_mode {
        UMode::Kronecker => {
            let r_hat = fit.r_hat.as_ref().ok_or_else(|| CliError::input("missing r_hat.csv"))?;
            let c_hat = fit.c_hat.as_ref().ok_or_else(|| CliError::input("missing c_hat.csv"))?;
            let (c_s, r_s) = (
                meta.c_s.ok_or_else(|| CliError::input("metadata lacks c_s"))?,
                meta.r_s.ok_or_else(|| CliError::input("metadata lacks r_s"))?,
            );
            let scale = 0.5 * (c_s + r_s);
            let ct = c_hat.transpose();
            MatrixPanel::new(
                centered
                    .iter()
                    .zip(f_new.iter())
                    .map(|(x, f)| x - (r_hat * f * &ct) / scale)
                    .collect(),
            )?
        }
        UMode::Projection => {
            let gamma = fit
                .gamma_tilde
                .as_ref()
                .ok_or_else(|| CliError::input("missing gamma_tilde.csv"))?;
            MatrixPanel::new(
                centered
                    .iter()
                    .zip(f_new.iter())
                    .map(|(x, f)| {
                        let common: Vector = gamma * vectorize(f);
                        x - unvectorize(&common, meta.p1, meta.p2)
                    })
                    .collect(),
            )?
        }
    };
    Ok((f_new, u_new))
}

#[derive(Serialize)]
struct PredictSummary {
    schema_version: &'static str,
    samples: usize,
    r2: Option<f64>,
}

pub fn run(args: PredictArgs) -> CliResult<i32> {
    let config = crate::config::RunConfig::load(args.config.as_ref())?;
    let panel_path = args
        .panel
        .or(config.panel)
        .ok_or_else(|| CliError::input("predict needs --panel"))?;
    let out = args.out.or(config.out).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;

    let fit = load_fit(&args.fit)?;
    let panel = io::read_panel_csv(&panel_path)?;
    let (f_new, u_new) = covariates(&fit, &panel)?;

    let y_hat = Vector::from_iterator(
        panel.len(),
        f_new
            .iter()
            .zip(u_new.iter())
            .map(|(f, u)| fit.a_hat.dot(f) + fit.b_hat.dot(u) + fit.metadata.y_mean),
    );

    let mut csv = String::from("sample_id,y_hat\n");
    for (i, v) in y_hat.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i, v));
    }
    fs::write(out.join("predictions.csv"), csv)?;

    let r2 = match args.response.as_ref() {
        None => None,
        Some(path) => {
            let y_true = io::read_response_csv(path)?;
            if y_true.len() != y_hat.len() {
                return Err(CliError::input(format!(
                    "true responses ({}) do not match predictions ({})",
                    y_true.len(),
                    y_hat.len()
                )));
            }
            let base = fit.metadata.y_mean;
            let sse: f64 = y_true
                .iter()
                .zip(y_hat.iter())
                .map(|(t, p)| (t - p) * (t - p))
                .sum();
            let sst: f64 = y_true.iter().map(|t| (t - base) * (t - base)).sum();
            Some(1.0 - sse / sst)
        }
    };

    let summary = PredictSummary { schema_version: "1", samples: y_hat.len(), r2 };
    let mut file = fs::File::create(out.join("predict.json"))?;
    serde_json::to_writer_pretty(&mut file, &summary)?;
    writeln!(file)?;
    if let Some(r2) = r2 {
        println!("predict: {} samples, r2 = {}", y_hat.len(), r2);
    } else {
        println!("predict: {} samples", y_hat.len());
    }
    Ok(0)
}
