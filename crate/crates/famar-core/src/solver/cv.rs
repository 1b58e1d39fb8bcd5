//! K-fold cross-validation over a penalty grid.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{FamarError, Result};
use crate::solver::{
    apgd_nuclear, fit_sparse_with, predict, RegressionData, RegressionFit, SolverConfig,
};

/// Which penalized path cross-validation tunes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    Nuclear,
    SparseLasso,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub lambda_star: f64,
    /// Mean squared prediction error per grid value, aligned with the input
    /// grid order.
    pub cv_curve: Vec<f64>,
}

fn fit_with(
    data: &RegressionData,
    method: FitMethod,
    config: &SolverConfig,
) -> Result<RegressionFit> {
    match method {
        FitMethod::Nuclear => apgd_nuclear(data, config),
        FitMethod::SparseLasso => fit_sparse_with(data, config),
    }
}

/// K-fold mean squared prediction error over the grid; `lambda_star` is the
/// minimizer with ties broken toward the larger penalty.
///
/// Folds are a seeded shuffle of the sample indices dealt round-robin, so the
/// outcome is a pure function of `(data, lambda_grid, folds, seed)`. Within a
/// fold the grid is swept from the largest penalty downward with warm starts.
pub fn cross_validate(
    data: &RegressionData,
    method: FitMethod,
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
    base_config: &SolverConfig,
) -> Result<CvOutcome> {
    if lambda_grid.is_empty() {
        return Err(FamarError::InvalidConfig("lambda grid is empty".into()));
    }
    if folds < 2 {
        return Err(FamarError::InvalidConfig("cross-validation needs at least 2 folds".into()));
    }
    let n = data.len();
    if folds > n {
        return Err(FamarError::InsufficientSamples(format!(
            "{} folds over {} samples leaves folds smaller than 1 sample",
            folds, n
        )));
    }

    // grid visited in descending order; `order[j]` is the input index
    let mut order: Vec<usize> = (0..lambda_grid.len()).collect();
    order.sort_by(|&a, &b| {
        lambda_grid[b]
            .partial_cmp(&lambda_grid[a])
            .expect("finite lambda grid")
    });

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let fold_of: Vec<usize> = {
        let mut f = vec![0usize; n];
        for (pos, &idx) in indices.iter().enumerate() {
            f[idx] = pos % folds;
        }
        f
    };

    let mut curve = vec![0.0f64; lambda_grid.len()];
    for fold in 0..folds {
        let train_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let val_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
        let train = data.subset(&train_idx)?;
        let val = data.subset(&val_idx)?;

        let mut warm_a = base_config.a0.clone();
        let mut warm_b = base_config.b0.clone();
        let mut warm_l = base_config.l0;
        for &j in &order {
            let config = SolverConfig {
                lambda: lambda_grid[j],
                l0: warm_l,
                a0: warm_a.clone(),
                b0: warm_b.clone(),
                ..base_config.clone()
            };
            let fit = fit_with(&train, method, &config)?;
            let preds = predict(&fit, &val.f_panel, &val.u_panel)?;
            let mse = (&preds - &val.y).norm_squared() / val.y.len() as f64;
            curve[j] += mse / folds as f64;
            warm_a = Some(fit.a_hat.clone());
            warm_b = Some(fit.b_hat.clone());
            warm_l = fit.final_step;
        }
    }

    // argmin with ties toward the larger penalty: strict improvement while
    // sweeping from the largest lambda down
    let mut best = order[0];
    for &j in &order {
        if curve[j] < curve[best] {
            best = j;
        }
    }
    Ok(CvOutcome { lambda_star: lambda_grid[best], cv_curve: curve })
}
