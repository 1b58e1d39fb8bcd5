//! `famar simulate`: experiment presets and custom generative recipes.

use std::fs;
use std::path::{Path, PathBuf};

use famar_core::sim::{
    self, normality_experiment, output, preset_appendix_h1, preset_appendix_h2,
    preset_appendix_h3, preset_normality, preset_setting1, preset_setting2, run_setting,
    RunSettingOptions, SettingGrid, SimConfig,
};

use crate::config::RunConfig;
use crate::errors::{CliError, CliResult};
use crate::io;
use crate::SimulateArgs;

const PRESETS: &[&str] = &[
    "normality",
    "setting1",
    "setting2",
    "appendix-h1",
    "appendix-h2",
    "appendix-h3",
];

const KS_LEVEL: f64 = 0.01;

fn out_dir(path: &Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = path.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Replaces the swept dimension of a preset grid (`p1 = p2` for the
/// Setting I family, `n` for the Setting II family).
fn apply_sweep(grid: &mut SettingGrid, sweep: &[usize]) -> CliResult<()> {
    if sweep.is_empty() {
        return Err(CliError::input("sweep override is empty"));
    }
    let template = grid.points[0].1.clone();
    let sweeps_p = grid.name.contains("setting1") || grid.name.contains("h1") || grid.name.contains("h2");
    grid.points = sweep
        .iter()
        .map(|&v| {
            let mut config = template.clone();
            if sweeps_p {
                config.p1 = v;
                config.p2 = v;
                (format!("p={}", v), config)
            } else {
                config.n = v;
                (format!("n={}", v), config)
            }
        })
        .collect();
    Ok(())
}

fn emit_dataset(dir: &Path, config: &SimConfig) -> CliResult<()> {
    let data = sim::generate(config, 0)?;
    io::write_panel_csv(&dir.join("pretrain_panel.csv"), &data.pretrain)?;
    io::write_panel_csv(&dir.join("panel.csv"), &data.panel)?;
    io::write_response_csv(&dir.join("response.csv"), &data.y)?;
    if let (Some(new_panel), Some(y_new)) = (&data.new_panel, &data.y_new) {
        io::write_panel_csv(&dir.join("new_panel.csv"), new_panel)?;
        io::write_response_csv(&dir.join("new_response.csv"), y_new)?;
    }
    io::write_matrix_csv(&dir.join("truth_a.csv"), &data.truth.a_star)?;
    io::write_matrix_csv(&dir.join("truth_b.csv"), &data.truth.b_star)?;
    io::write_matrix_csv(&dir.join("truth_r.csv"), &data.truth.r_star)?;
    io::write_matrix_csv(&dir.join("truth_c.csv"), &data.truth.c_star)?;
    Ok(())
}

pub fn run(args: SimulateArgs) -> CliResult<i32> {
    let config = RunConfig::load(args.config.as_ref())?;
    let preset = args.preset.or(config.preset.clone());
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let reps = args.reps.or(config.reps);
    let dir = out_dir(&args.out.or(config.out.clone()))?;
    let emit_data = args.emit_data || config.emit_data.unwrap_or(false);

    let mut solver_opts = RunSettingOptions::default();
    if let Some(overrides) = &config.solver {
        if let Some(eps) = overrides.cv_epsilon {
            solver_opts.cv_epsilon = eps;
        }
        if let Some(iters) = overrides.cv_max_iter {
            solver_opts.cv_max_iter = iters;
        }
        if let Some(eps) = overrides.epsilon {
            solver_opts.final_epsilon = eps;
        }
        if let Some(iters) = overrides.max_iter {
            solver_opts.final_max_iter = iters;
        }
    }
    if let Some(folds) = config.folds {
        solver_opts.folds = folds;
    }
    if let Some(spec) = &config.lambda_grid {
        let spec = crate::config::LambdaGridSpec::parse(spec)?;
        solver_opts.lambda_points = spec.points;
        solver_opts.lambda_min_frac = spec.min_frac / spec.max_frac;
    }
    if let Some(u_mode) = config.u_mode {
        solver_opts.u_mode = u_mode;
    }

    match preset.as_deref() {
        Some("normality") => {
            let mut sim_config = preset_normality(seed);
            if let Some(r) = reps {
                sim_config.replications = r;
            }
            if emit_data {
                emit_dataset(&dir, &sim_config)?;
            }
            let result = normality_experiment(&sim_config, KS_LEVEL)?;
            let mut csv = Vec::new();
            output::write_normality_csv(&mut csv, &result)?;
            fs::write(dir.join("normality.csv"), csv)?;
            let mut json = Vec::new();
            output::write_normality_json(&mut json, &result)?;
            fs::write(dir.join("normality.json"), json)?;
            println!(
                "normality: {} replications, pass rate R {:.4}, pass rate C {:.4}",
                result.replications, result.pass_rate_r, result.pass_rate_c
            );
            Ok(0)
        }
        Some(name @ ("setting1" | "setting2" | "appendix-h1" | "appendix-h2" | "appendix-h3")) => {
            let mut grid = match name {
                "setting1" => preset_setting1(seed),
                "setting2" => preset_setting2(seed),
                "appendix-h1" => preset_appendix_h1(seed),
                "appendix-h2" => preset_appendix_h2(seed),
                _ => preset_appendix_h3(seed),
            };
            if let Some(sweep) = &config.sweep {
                apply_sweep(&mut grid, sweep)?;
            }
            if let Some(r) = reps {
                for (_, c) in &mut grid.points {
                    c.replications = r;
                }
            }
            if emit_data {
                emit_dataset(&dir, &grid.points[0].1)?;
            }
            let table = run_setting(&grid.name, &grid.points, &solver_opts)?;
            write_table(&dir, &table)?;
            println!(
                "{}: {} grid points, {} rows",
                grid.name,
                grid.points.len(),
                table.records.len()
            );
            Ok(0)
        }
        Some(other) => Err(CliError::input(format!(
            "unknown preset '{}'; valid presets: {}",
            other,
            PRESETS.join(", ")
        ))),
        None => {
            // custom single-point run from a full generative recipe
            let mut sim_config = config.sim.clone().ok_or_else(|| {
                CliError::input("simulate needs --preset or a 'sim' recipe in --config")
            })?;
            sim_config.seed = args.seed.or(config.seed).unwrap_or(sim_config.seed);
            if let Some(r) = reps {
                sim_config.replications = r;
            }
            if emit_data {
                emit_dataset(&dir, &sim_config)?;
            }
            let label = format!("n={},p1={},p2={}", sim_config.n, sim_config.p1, sim_config.p2);
            let table = run_setting("custom", &[(label, sim_config)], &solver_opts)?;
            write_table(&dir, &table)?;
            println!("custom: {} rows", table.records.len());
            Ok(0)
        }
    }
}

fn write_table(dir: &Path, table: &sim::SimResultTable) -> CliResult<()> {
    let mut csv = Vec::new();
    output::write_records_csv(&mut csv, &table.records)?;
    fs::write(dir.join("records.csv"), csv)?;
    let mut json = Vec::new();
    output::write_aggregates_json(&mut json, table)?;
    fs::write(dir.join("aggregates.json"), json)?;
    Ok(())
}
