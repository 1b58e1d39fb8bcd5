//! Rolling-window one-step-ahead prediction.

use serde::Serialize;

use crate::error::{FamarError, Result};
use crate::mfm::{self, MfmOptions, UMode};
use crate::panel::{DenseMatrix, MatrixPanel, Vector};
use crate::solver::{
    apgd_nuclear, cross_validate, fit_factors_ols, log_lambda_grid, nuclear_null_threshold,
    predict, FitMethod, RegressionData, SolverConfig,
};

/// Prediction model used inside each window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RollingMethod {
    /// Factor and idiosyncratic covariates, nuclear penalty on the latter.
    Famar,
    /// OLS on the estimated factors alone.
    FactorsOnly,
    /// Nuclear-penalized regression on the estimated idiosyncratics alone.
    IdioOnly,
    /// Nuclear-penalized regression on the raw covariate matrices.
    BaselineX,
}

impl RollingMethod {
    pub fn label(&self) -> &'static str {
        match self {
            RollingMethod::Famar => "famar",
            RollingMethod::FactorsOnly => "factors_only",
            RollingMethod::IdioOnly => "idio_only",
            RollingMethod::BaselineX => "baseline_x",
        }
    }
}

/// How the penalty is chosen inside each window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    /// K-fold cross-validation over the log grid.
    CrossValidate,
    /// A fixed fraction of the window's null threshold; low-variance and
    /// well suited to short windows.
    FixedFraction(f64),
}

#[derive(Debug, Clone)]
pub struct RollingOptions {
    pub lambda_rule: LambdaRule,
    pub folds: usize,
    pub lambda_points: usize,
    pub lambda_min_frac: f64,
    pub cv_epsilon: f64,
    pub cv_max_iter: usize,
    pub final_epsilon: f64,
    pub final_max_iter: usize,
    pub u_mode: UMode,
}

impl Default for RollingOptions {
    fn default() -> Self {
        Self {
            lambda_rule: LambdaRule::CrossValidate,
            folds: 3,
            lambda_points: 6,
            lambda_min_frac: 1e-2,
            cv_epsilon: 1e-4,
            cv_max_iter: 600,
            final_epsilon: 1e-5,
            final_max_iter: 3000,
            u_mode: UMode::Kronecker,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RollingPrediction {
    /// Sample index being predicted.
    pub t: usize,
    pub y_true: f64,
    pub y_hat: f64,
    /// Mean of the training responses in this window (the null predictor).
    pub train_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RollingResult {
    pub method: String,
    pub window: usize,
    pub pretrain_len: usize,
    /// Out-of-sample R-squared against the per-window training mean.
    pub r2: f64,
    pub predictions: Vec<RollingPrediction>,
}

/// Per-entry mean and sd over the training samples; sd gets a floor so
/// constant entries normalize to zero instead of blowing up.
fn train_stats(train: &MatrixPanel) -> (DenseMatrix, DenseMatrix) {
    let mean = train.mean_matrix();
    let n = train.len() as f64;
    let mut var = DenseMatrix::zeros(train.rows(), train.cols());
    for m in train.iter() {
        let centered = m - &mean;
        var.zip_apply(&centered, |v, c| *v += c * c);
    }
    let sd = var.map(|v| {
        let s = (v / n).sqrt();
        if s < 1e-12 {
            1.0
        } else {
            s
        }
    });
    (mean, sd)
}

fn normalize_panel(panel: &MatrixPanel, mean: &DenseMatrix, sd: &DenseMatrix) -> MatrixPanel {
    let mats = panel
        .iter()
        .map(|m| {
            let mut out = m - mean;
            out.zip_apply(sd, |v, s| *v /= s);
            out
        })
        .collect();
    MatrixPanel::from_parts_unchecked(panel.rows(), panel.cols(), mats)
}

fn normalize_matrix(m: &DenseMatrix, mean: &DenseMatrix, sd: &DenseMatrix) -> DenseMatrix {
    let mut out = m - mean;
    out.zip_apply(sd, |v, s| *v /= s);
    out
}

/// One-step-ahead rolling-window prediction.
///
/// Each prediction at index `t` uses the window `[t - window, t)`: the first
/// `pretrain_len` samples pre-train the projections, the remaining
/// `window - pretrain_len` training samples estimate loadings and regression
/// coefficients. Covariates are normalized entrywise by the training mean and
/// sd of the window; the response is demeaned by the training mean, which is
/// added back to the prediction. The reported out-of-sample R-squared is
/// `1 - sum (y_t - y_hat_t)^2 / sum (y_t - mean_train(t))^2`.
pub fn rolling_predict(
    panel: &MatrixPanel,
    y: &Vector,
    window: usize,
    pretrain_len: usize,
    k1: usize,
    k2: usize,
    method: RollingMethod,
    opts: &RollingOptions,
) -> Result<RollingResult> {
    let n = panel.len();
    if y.len() != n {
        return Err(FamarError::DimensionMismatch(format!(
            "panel has {} samples, response has {}",
            n,
            y.len()
        )));
    }
    let train_len = window
        .checked_sub(pretrain_len)
        .filter(|&t| t >= 2 && pretrain_len >= 1)
        .ok_or_else(|| {
            FamarError::InvalidConfig("window must exceed pretrain_len by at least 2".into())
        })?;
    if window >= n {
        return Err(FamarError::InsufficientSamples(format!(
            "window {} leaves no samples to predict out of {}",
            window, n
        )));
    }
    if opts.folds < 2 || opts.folds > train_len {
        return Err(FamarError::InvalidConfig(
            "cross-validation folds must lie in [2, train_len]".into(),
        ));
    }

    let mut predictions = Vec::with_capacity(n - window);
    for t in window..n {
        let start = t - window;
        let pre = panel.slice(start..start + pretrain_len)?;
        let train = panel.slice(start + pretrain_len..t)?;
        let (mean, sd) = train_stats(&train);
        let pre_n = normalize_panel(&pre, &mean, &sd);
        let train_n = normalize_panel(&train, &mean, &sd);
        let x_t = normalize_matrix(panel.get(t), &mean, &sd);

        let y_train = Vector::from_iterator(
            train_len,
            (start + pretrain_len..t).map(|i| y[i]),
        );
        let y_mean = y_train.mean();
        let y_c = y_train.map(|v| v - y_mean);

        let y_hat = window_forecast(
            method, &pre_n, &train_n, &x_t, &y_c, k1, k2, opts,
            // fold assignment is deterministic per window
            t as u64,
        )? + y_mean;
        predictions.push(RollingPrediction { t, y_true: y[t], y_hat, train_mean: y_mean });
    }

    let sse: f64 = predictions.iter().map(|p| (p.y_true - p.y_hat).powi(2)).sum();
    let sst: f64 = predictions
        .iter()
        .map(|p| (p.y_true - p.train_mean).powi(2))
        .sum();
    let r2 = 1.0 - sse / sst;
    Ok(RollingResult {
        method: method.label().into(),
        window,
        pretrain_len,
        r2,
        predictions,
    })
}

#[allow(clippy::too_many_arguments)]
fn window_forecast(
    method: RollingMethod,
    pretrain: &MatrixPanel,
    train: &MatrixPanel,
    x_t: &DenseMatrix,
    y_c: &Vector,
    k1: usize,
    k2: usize,
    opts: &RollingOptions,
    cv_seed: u64,
) -> Result<f64> {
    let one_panel =
        |m: &DenseMatrix| MatrixPanel::from_parts_unchecked(m.nrows(), m.ncols(), vec![m.clone()]);
    let empty_one = MatrixPanel::from_parts_unchecked(0, 0, vec![DenseMatrix::zeros(0, 0)]);

    let cv_fit = |data: &RegressionData| -> Result<crate::solver::RegressionFit> {
        let lambda_max = nuclear_null_threshold(data)?;
        let lambda = match opts.lambda_rule {
            LambdaRule::FixedFraction(frac) => frac * lambda_max,
            LambdaRule::CrossValidate => {
                let grid = log_lambda_grid(lambda_max, opts.lambda_points, opts.lambda_min_frac);
                let cv_config = SolverConfig {
                    epsilon: opts.cv_epsilon,
                    max_iter: opts.cv_max_iter,
                    ..SolverConfig::default()
                };
                cross_validate(data, FitMethod::Nuclear, &grid, opts.folds, cv_seed, &cv_config)?
                    .lambda_star
            }
        };
        apgd_nuclear(
            data,
            &SolverConfig {
                lambda,
                epsilon: opts.final_epsilon,
                max_iter: opts.final_max_iter,
                ..SolverConfig::default()
            },
        )
    };

    match method {
        RollingMethod::BaselineX => {
            let data = RegressionData::without_factors(y_c.clone(), train.clone())?;
            let fit = cv_fit(&data)?;
            let preds = predict(&fit, &empty_one, &one_panel(x_t))?;
            Ok(preds[0])
        }
        _ => {
            let mfm_fit = mfm::fit_mfm(
                pretrain,
                train,
                k1,
                k2,
                MfmOptions { demean: false, u_mode: opts.u_mode },
            )?;
            let f_t_panel = mfm_fit.project_new(&one_panel(x_t))?;
            match method {
                RollingMethod::FactorsOnly => {
                    let fit = fit_factors_ols(y_c, &mfm_fit.f_hat)?;
                    let preds = predict(&fit, &f_t_panel, &MatrixPanel::zeros(1, 0, 0)?)?;
                    Ok(preds[0])
                }
                RollingMethod::IdioOnly => {
                    let u_t = mfm_fit.idiosyncratic_new(&one_panel(x_t), &f_t_panel)?;
                    let data =
                        RegressionData::without_factors(y_c.clone(), mfm_fit.u_hat.clone())?;
                    let fit = cv_fit(&data)?;
                    let preds = predict(&fit, &empty_one, &u_t)?;
                    Ok(preds[0])
                }
                RollingMethod::Famar => {
                    let u_t = mfm_fit.idiosyncratic_new(&one_panel(x_t), &f_t_panel)?;
                    let data = RegressionData::new(
                        y_c.clone(),
                        mfm_fit.f_hat.clone(),
                        mfm_fit.u_hat.clone(),
                    )?;
                    let fit = cv_fit(&data)?;
                    let preds = predict(&fit, &f_t_panel, &u_t)?;
                    Ok(preds[0])
                }
                RollingMethod::BaselineX => unreachable!(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::{AMode, SimConfig};
    use crate::sim::generate::generate;

    fn series(seed: u64, n: usize, noise_sd: f64, idio_sd: f64) -> (MatrixPanel, Vector) {
        let config = SimConfig {
            n,
            n_pretrain: 1,
            n_new: 0,
            p1: 6,
            p2: 5,
            k1: 2,
            k2: 2,
            rank_b: 2,
            noise_sd,
            idio_sd,
            seed,
            replications: 1,
            a_mode: AMode::ScaledRtbc { scale: 0.5 },
            ..SimConfig::experiment_base()
        };
        let data = generate(&config, 0).unwrap();
        (data.panel, data.y)
    }

    #[test]
    fn perfect_foresight_approaches_unit_r2() {
        // noiseless response and tiny idiosyncratic noise: y is an exact
        // function of the covariates the window can recover
        let (panel, y) = series(3, 90, 0.0, 1e-4);
        let result = rolling_predict(
            &panel,
            &y,
            60,
            20,
            2,
            2,
            RollingMethod::Famar,
            &RollingOptions::default(),
        )
        .unwrap();
        assert!(result.r2 > 0.98, "r2 = {}", result.r2);
    }

    #[test]
    fn permuted_response_has_no_skill() {
        let (panel, y) = series(4, 90, 0.5, 0.2);
        // reverse the response against the covariates: any fit is noise
        let y_perm = Vector::from_iterator(y.len(), y.iter().rev().cloned());
        let result = rolling_predict(
            &panel,
            &y_perm,
            60,
            20,
            2,
            2,
            RollingMethod::Famar,
            &RollingOptions::default(),
        )
        .unwrap();
        assert!(result.r2 < 0.05, "r2 = {}", result.r2);
    }

    #[test]
    fn window_bounds_are_validated() {
        let (panel, y) = series(5, 30, 0.5, 0.2);
        assert!(rolling_predict(
            &panel,
            &y,
            30,
            10,
            2,
            2,
            RollingMethod::Famar,
            &RollingOptions::default()
        )
        .is_err());
        assert!(rolling_predict(
            &panel,
            &y,
            10,
            10,
            2,
            2,
            RollingMethod::Famar,
            &RollingOptions::default()
        )
        .is_err());
    }
}
