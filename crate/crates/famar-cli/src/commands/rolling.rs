//! `famar rolling`: rolling-window one-step-ahead prediction.

use std::fs;
use std::path::PathBuf;

use famar_core::sim::output::{write_rolling_csv, write_rolling_json};
use famar_core::sim::rolling::{rolling_predict, RollingMethod, RollingOptions};

use crate::config::{LambdaGridSpec, RunConfig};
use crate::errors::{CliError, CliResult};
use crate::io;
use crate::RollingArgs;

fn parse_method(raw: &str) -> CliResult<RollingMethod> {
    match raw {
        "famar" => Ok(RollingMethod::Famar),
        "factors-only" => Ok(RollingMethod::FactorsOnly),
        "idio-only" => Ok(RollingMethod::IdioOnly),
        "baseline" => Ok(RollingMethod::BaselineX),
        other => Err(CliError::input(format!(
            "unknown rolling method '{}'; expected famar, factors-only, idio-only, or baseline",
            other
        ))),
    }
}

pub fn run(args: RollingArgs) -> CliResult<i32> {
    let config = RunConfig::load(args.config.as_ref())?;
    let panel_path = args
        .panel
        .or(config.panel.clone())
        .ok_or_else(|| CliError::input("rolling needs --panel"))?;
    let response_path = args
        .response
        .or(config.response.clone())
        .ok_or_else(|| CliError::input("rolling needs --response"))?;
    let window = args
        .window
        .or(config.window)
        .ok_or_else(|| CliError::input("rolling needs --window"))?;
    let pretrain_len = args
        .pretrain_len
        .or(config.pretrain_len)
        .ok_or_else(|| CliError::input("rolling needs --pretrain-len"))?;
    let k1 = args.k1.or(config.k1).ok_or_else(|| CliError::input("rolling needs --k1"))?;
    let k2 = args.k2.or(config.k2).ok_or_else(|| CliError::input("rolling needs --k2"))?;
    let method = parse_method(
        &args
            .method
            .or(config.method.clone())
            .unwrap_or_else(|| "famar".into()),
    )?;
    let out = args.out.or(config.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;

    let mut opts = RollingOptions::default();
    if let Some(folds) = args.folds.or(config.folds) {
        opts.folds = folds;
    }
    if let Some(raw) = args.lambda_grid.as_deref().or(config.lambda_grid.as_deref()) {
        let spec = LambdaGridSpec::parse(raw)?;
        opts.lambda_points = spec.points;
        opts.lambda_min_frac = spec.min_frac / spec.max_frac;
    }
    if let Some(u_mode) = config.u_mode {
        opts.u_mode = u_mode;
    }

    let panel = io::read_panel_csv(&panel_path)?;
    let y = io::read_response_csv(&response_path)?;
    let result = rolling_predict(&panel, &y, window, pretrain_len, k1, k2, method, &opts)?;

    let mut csv = Vec::new();
    write_rolling_csv(&mut csv, &result)?;
    fs::write(out.join("rolling_predictions.csv"), csv)?;
    let mut json = Vec::new();
    write_rolling_json(&mut json, &result)?;
    fs::write(out.join("rolling.json"), json)?;
    println!(
        "rolling: method={} predictions={} r2={}",
        result.method,
        result.predictions.len(),
        result.r2
    );
    Ok(0)
}
