//! `famar fit`: estimate the factor model and the penalized regression,
//! writing all artifacts needed for prediction and inspection.

use std::fs;
use std::path::PathBuf;

use famar_core::mfm::{fit_mfm, MfmFit, MfmOptions, UMode};
use famar_core::solver::{
    apgd_nuclear, cross_validate, fit_baseline_nuclear, fit_sparse_with, nuclear_null_threshold,
    sparse_null_threshold, FitMethod, RegressionData, RegressionFit, SolverConfig,
};
use famar_core::{MatrixPanel, Vector};

use crate::config::{LambdaGridSpec, RunConfig, SolverOverrides, DEFAULT_GRID_SPEC};
use crate::errors::{CliError, CliResult, EXIT_NONCONVERGENCE};
use crate::io::{self, FitMetadata};
use crate::FitArgs;

pub(crate) struct ResolvedFit {
    pub panel: MatrixPanel,
    pub pretrain: MatrixPanel,
    pub y: Vector,
    pub k1: usize,
    pub k2: usize,
    pub method: String,
    pub demean: bool,
    pub u_mode: UMode,
    pub seed: u64,
    pub folds: usize,
    pub lambda: Option<f64>,
    pub grid_spec: LambdaGridSpec,
    pub solver: SolverOverrides,
    pub out: PathBuf,
}

fn resolve(args: FitArgs) -> CliResult<ResolvedFit> {
    let config = RunConfig::load(args.config.as_ref())?;
    let panel_path = args
        .panel
        .or(config.panel.clone())
        .ok_or_else(|| CliError::input("fit needs --panel"))?;
    let response_path = args
        .response
        .or(config.response.clone())
        .ok_or_else(|| CliError::input("fit needs --response"))?;
    let k1 = args.k1.or(config.k1).ok_or_else(|| CliError::input("fit needs --k1"))?;
    let k2 = args.k2.or(config.k2).ok_or_else(|| CliError::input("fit needs --k2"))?;
    let method = args.method.or(config.method.clone()).unwrap_or_else(|| "nuclear".into());
    if !["nuclear", "sparse", "baseline"].contains(&method.as_str()) {
        return Err(CliError::input(format!(
            "unknown fit method '{}'; expected nuclear, sparse, or baseline",
            method
        )));
    }

    let full_panel = io::read_panel_csv(&panel_path)?;
    let y_full = io::read_response_csv(&response_path)?;

    // pre-training split: an explicit file, or the leading fraction of the
    // panel (the library never splits on its own)
    let pretrain_path = args.pretrain.or(config.pretrain.clone());
    let pretrain_frac = args.pretrain_frac.or(config.pretrain_frac);
    let (pretrain, panel, y) = match (pretrain_path, pretrain_frac) {
        (Some(path), None) => {
            if y_full.len() != full_panel.len() {
                return Err(CliError::input(format!(
                    "panel has {} samples but response has {}",
                    full_panel.len(),
                    y_full.len()
                )));
            }
            (io::read_panel_csv(&path)?, full_panel, y_full)
        }
        (None, Some(frac)) => {
            if !(frac > 0.0 && frac < 1.0) {
                return Err(CliError::input("--pretrain-frac must lie in (0, 1)"));
            }
            let n = full_panel.len();
            let cut = ((frac * n as f64).floor() as usize).max(1);
            if cut + 1 >= n {
                return Err(CliError::input(
                    "--pretrain-frac leaves no estimation samples",
                ));
            }
            let pretrain = full_panel.slice(0..cut)?;
            let panel = full_panel.slice(cut..n)?;
            let y = match y_full.len() {
                // response may cover the whole panel or only the estimation part
                len if len == n => Vector::from_iterator(n - cut, (cut..n).map(|i| y_full[i])),
                len if len == n - cut => y_full,
                len => {
                    return Err(CliError::input(format!(
                        "response length {} matches neither the panel ({}) nor the estimation split ({})",
                        len,
                        n,
                        n - cut
                    )))
                }
            };
            (pretrain, panel, y)
        }
        (Some(_), Some(_)) => {
            return Err(CliError::input("give either --pretrain or --pretrain-frac, not both"))
        }
        (None, None) => {
            return Err(CliError::input("fit needs --pretrain or --pretrain-frac"))
        }
    };

    let default_u_mode = if method == "sparse" { UMode::Projection } else { UMode::Kronecker };
    let grid_spec = match args.lambda_grid.as_deref().or(config.lambda_grid.as_deref()) {
        Some(raw) => LambdaGridSpec::parse(raw)?,
        None => DEFAULT_GRID_SPEC,
    };
    Ok(ResolvedFit {
        panel,
        pretrain,
        y,
        k1,
        k2,
        method,
        demean: config.demean.unwrap_or(true),
        u_mode: config.u_mode.unwrap_or(default_u_mode),
        seed: args.seed.or(config.seed).unwrap_or(0),
        folds: args.folds.or(config.folds).unwrap_or(5),
        lambda: args.lambda.or(config.lambda),
        grid_spec,
        solver: config.solver.clone().unwrap_or_default(),
        out: args.out.or(config.out).unwrap_or_else(|| PathBuf::from(".")),
    })
}

fn solver_config(overrides: &SolverOverrides, lambda: f64) -> SolverConfig {
    let mut config = SolverConfig::with_lambda(lambda);
    if let Some(l0) = overrides.l0 {
        config.l0 = l0;
    }
    if let Some(gamma) = overrides.gamma {
        config.gamma = gamma;
    }
    if let Some(epsilon) = overrides.epsilon {
        config.epsilon = epsilon;
    }
    if let Some(max_iter) = overrides.max_iter {
        config.max_iter = max_iter;
    }
    config
}

fn cv_config(overrides: &SolverOverrides, base: &SolverConfig) -> SolverConfig {
    let mut config = base.clone();
    config.epsilon = overrides.cv_epsilon.unwrap_or(1e-4);
    config.max_iter = overrides.cv_max_iter.unwrap_or(800);
    config
}

fn select_lambda(
    data: &RegressionData,
    spec: &ResolvedFit,
    method: FitMethod,
) -> CliResult<(f64, Option<f64>)> {
    if let Some(lambda) = spec.lambda {
        if lambda < 0.0 {
            return Err(CliError::input("--lambda must be nonnegative"));
        }
        return Ok((lambda, None));
    }
    let lambda_max = match method {
        FitMethod::Nuclear => nuclear_null_threshold(data)?,
        FitMethod::SparseLasso => sparse_null_threshold(data)?,
    };
    let grid = spec.grid_spec.build(lambda_max);
    let base = solver_config(&spec.solver, 0.0);
    let cv = cross_validate(data, method, &grid, spec.folds, spec.seed, &cv_config(&spec.solver, &base))?;
    Ok((cv.lambda_star, Some(cv.lambda_star)))
}

fn write_common_artifacts(
    spec: &ResolvedFit,
    mfm: Option<&MfmFit>,
    reg: &RegressionFit,
    lambda_star: Option<f64>,
    y_mean: f64,
) -> CliResult<()> {
    fs::create_dir_all(&spec.out)?;
    io::write_matrix_csv(&spec.out.join("a_hat.csv"), &reg.a_hat)?;
    io::write_matrix_csv(&spec.out.join("b_hat.csv"), &reg.b_hat)?;
    if let Some(fit) = mfm {
        io::write_matrix_csv(&spec.out.join("r_hat.csv"), &fit.r_hat)?;
        io::write_matrix_csv(&spec.out.join("c_hat.csv"), &fit.c_hat)?;
        io::write_matrix_csv(&spec.out.join("w1.csv"), &fit.projections.w1)?;
        io::write_matrix_csv(&spec.out.join("w2.csv"), &fit.projections.w2)?;
        io::write_matrix_csv(&spec.out.join("gamma_tilde.csv"), &fit.gamma_tilde)?;
        io::write_panel_csv(&spec.out.join("f_hat.csv"), &fit.f_hat)?;
        if let Some(mean) = &fit.panel_mean {
            io::write_matrix_csv(&spec.out.join("panel_mean.csv"), mean)?;
        }
    }
    let metadata = FitMetadata {
        schema_version: io::METADATA_SCHEMA_VERSION.into(),
        method: spec.method.clone(),
        n: spec.panel.len(),
        p1: spec.panel.rows(),
        p2: spec.panel.cols(),
        k1: spec.k1,
        k2: spec.k2,
        lambda: reg.lambda,
        lambda_star,
        folds: if lambda_star.is_some() { Some(spec.folds) } else { None },
        iterations: reg.iterations,
        rank_b: reg.rank_b,
        objective: reg.objective_trace.last().copied().unwrap_or(f64::NAN),
        converged: reg.converged,
        u_mode: mfm.map(|m| m.u_hat_mode),
        demean: spec.demean,
        c_s: mfm.map(|m| m.c_s),
        r_s: mfm.map(|m| m.r_s),
        y_mean,
        seed: spec.seed,
    };
    io::write_metadata(&spec.out.join("metadata.json"), &metadata)?;
    Ok(())
}

pub fn run(args: FitArgs) -> CliResult<i32> {
    let spec = resolve(args)?;
    // simple demeaning of the response; panels are demeaned inside the fit
    let y_mean = if spec.demean { spec.y.mean() } else { 0.0 };
    let y_centered = spec.y.map(|v| v - y_mean);

    let (mfm_fit, reg_fit, lambda_star) = match spec.method.as_str() {
        "baseline" => {
            let data = RegressionData::without_factors(y_centered, spec.panel.clone())?;
            let (lambda, lambda_star) = select_lambda(&data, &spec, FitMethod::Nuclear)?;
            let fit = fit_baseline_nuclear(&data.y, &data.u_panel, &solver_config(&spec.solver, lambda))?;
            (None, fit, lambda_star)
        }
        "sparse" => {
            let mfm = fit_mfm(
                &spec.pretrain,
                &spec.panel,
                spec.k1,
                spec.k2,
                MfmOptions { demean: spec.demean, u_mode: UMode::Projection },
            )?;
            let data = RegressionData::new(y_centered, mfm.f_hat.clone(), mfm.u_hat.clone())?;
            let (lambda, lambda_star) = select_lambda(&data, &spec, FitMethod::SparseLasso)?;
            let fit = fit_sparse_with(&data, &solver_config(&spec.solver, lambda))?;
            (Some(mfm), fit, lambda_star)
        }
        _ => {
            let mfm = fit_mfm(
                &spec.pretrain,
                &spec.panel,
                spec.k1,
                spec.k2,
                MfmOptions { demean: spec.demean, u_mode: spec.u_mode },
            )?;
            let data = RegressionData::new(y_centered, mfm.f_hat.clone(), mfm.u_hat.clone())?;
            let (lambda, lambda_star) = select_lambda(&data, &spec, FitMethod::Nuclear)?;
            let fit = apgd_nuclear(&data, &solver_config(&spec.solver, lambda))?;
            (Some(mfm), fit, lambda_star)
        }
    };

    write_common_artifacts(&spec, mfm_fit.as_ref(), &reg_fit, lambda_star, y_mean)?;
    println!(
        "fit: method={} lambda={} rank_b={} iterations={} converged={}",
        spec.method, reg_fit.lambda, reg_fit.rank_b, reg_fit.iterations, reg_fit.converged
    );
    if reg_fit.converged {
        Ok(0)
    } else {
        eprintln!("warning: solver did not converge within its iteration budget");
        Ok(EXIT_NONCONVERGENCE)
    }
}
