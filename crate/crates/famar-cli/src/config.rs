//! The run configuration document and flag merging. A run is described by a
//! single JSON document; command-line flags override its fields.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use famar_core::mfm::UMode;
use famar_core::sim::SimConfig;

use crate::errors::{CliError, CliResult};

/// Solver controls exposed through the config document.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub l0: Option<f64>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    /// Tolerance and iteration cap used inside cross-validation folds.
    pub cv_epsilon: Option<f64>,
    pub cv_max_iter: Option<usize>,
}

/// One JSON document covering every subcommand; unknown keys are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub panel: Option<PathBuf>,
    pub response: Option<PathBuf>,
    pub pretrain: Option<PathBuf>,
    pub pretrain_frac: Option<f64>,
    pub k1: Option<usize>,
    pub k2: Option<usize>,
    pub method: Option<String>,
    pub lambda: Option<f64>,
    /// `points,min_frac,max_frac` of the null threshold, log spaced.
    pub lambda_grid: Option<String>,
    pub folds: Option<usize>,
    pub out: Option<PathBuf>,
    pub preset: Option<String>,
    pub reps: Option<usize>,
    pub no_rotate: Option<bool>,
    pub demean: Option<bool>,
    pub u_mode: Option<UMode>,
    pub window: Option<usize>,
    pub pretrain_len: Option<usize>,
    /// Replaces the swept values of a setting preset (e.g. `[20, 40]`).
    pub sweep: Option<Vec<usize>>,
    /// Full generative recipe for `simulate` without a preset.
    pub sim: Option<SimConfig>,
    pub solver: Option<SolverOverrides>,
    /// Have `simulate` also write the generated dataset of replication 0.
    pub emit_data: Option<bool>,
}

impl RunConfig {
    pub fn load(path: Option<&PathBuf>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::input(format!("{}: {}", p.display(), e)))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::input(format!("{}: {}", p.display(), e)))
            }
        }
    }
}

/// Parsed `points,min_frac,max_frac` grid specification.
#[derive(Debug, Clone, Copy)]
pub struct LambdaGridSpec {
    pub points: usize,
    pub min_frac: f64,
    pub max_frac: f64,
}

impl LambdaGridSpec {
    pub fn parse(raw: &str) -> CliResult<Self> {
        let parts: Vec<&str> = raw.split(',').collect();
        if parts.len() != 3 {
            return Err(CliError::input(format!(
                "lambda grid '{}' must be 'points,min_frac,max_frac'",
                raw
            )));
        }
        let points: usize = parts[0]
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("bad grid point count '{}'", parts[0])))?;
        let min_frac: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("bad grid min fraction '{}'", parts[1])))?;
        let max_frac: f64 = parts[2]
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("bad grid max fraction '{}'", parts[2])))?;
        if points == 0 || !(min_frac > 0.0) || !(max_frac >= min_frac) {
            return Err(CliError::input(format!("degenerate lambda grid '{}'", raw)));
        }
        Ok(Self { points, min_frac, max_frac })
    }

    pub fn build(&self, lambda_max: f64) -> Vec<f64> {
        famar_core::solver::log_lambda_grid(
            lambda_max * self.max_frac,
            self.points,
            self.min_frac / self.max_frac,
        )
    }
}

/// Default grid when only folds are given: 20 log points on
/// `[1e-4, 1] * lambda_max`.
pub const DEFAULT_GRID_SPEC: LambdaGridSpec =
    LambdaGridSpec { points: 20, min_frac: 1e-4, max_frac: 1.0 };
