//! Penalized matrix factor regression.
//!
//! The nuclear-norm program is solved by accelerated proximal gradient descent
//! with backtracking on the step parameter, the sparse program by the two-step
//! projection-then-lasso scheme, and the vanilla baseline by the same nuclear
//! solver with an empty factor block. One accelerated core drives both
//! penalties.

mod core;
mod cv;

pub use cv::{cross_validate, CvOutcome, FitMethod};

use crate::error::{FamarError, Result};
use crate::kernels::{effective_rank, nuclear_norm, unvectorize, vectorize};
use crate::panel::{DenseMatrix, MatrixPanel, Vector};
use core::{accelerated_solve, Design, Penalty, StopRule};

/// Duality-gap tolerance at which the lasso sub-solver declares convergence.
pub const SPARSE_DUALITY_GAP: f64 = 1e-7;

/// Samples `(y_i, F_i, U_i)` entering a matrix factor regression. The factor
/// panel may have shape `0 x 0` (see [`RegressionData::without_factors`]),
/// which reduces the program to plain matrix regression on the `u_panel`.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub y: Vector,
    pub f_panel: MatrixPanel,
    pub u_panel: MatrixPanel,
}

impl RegressionData {
    pub fn new(y: Vector, f_panel: MatrixPanel, u_panel: MatrixPanel) -> Result<Self> {
        if y.len() != f_panel.len() || y.len() != u_panel.len() {
            return Err(FamarError::DimensionMismatch(format!(
                "sample counts disagree: y has {}, factors {}, idiosyncratics {}",
                y.len(),
                f_panel.len(),
                u_panel.len()
            )));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(FamarError::NonFinite("response vector".into()));
        }
        Ok(Self { y, f_panel, u_panel })
    }

    /// Regression of `y` directly on the covariate panel, with an empty factor
    /// block.
    pub fn without_factors(y: Vector, u_panel: MatrixPanel) -> Result<Self> {
        let n = u_panel.len();
        let f_panel = MatrixPanel::zeros(n, 0, 0)?;
        Self::new(y, f_panel, u_panel)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.len() == 0
    }

    /// Sub-sample of the data, in the order given by `indices`.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let y = Vector::from_iterator(indices.len(), indices.iter().map(|&i| self.y[i]));
        Ok(Self {
            y,
            f_panel: self.f_panel.subset(indices)?,
            u_panel: self.u_panel.subset(indices)?,
        })
    }
}

/// Solver configuration for the accelerated proximal gradient method.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Penalty weight `lambda_n`.
    pub lambda: f64,
    /// Initial step-size estimate `L_0`.
    pub l0: f64,
    /// Multiplicative backtracking factor, `> 1`.
    pub gamma: f64,
    /// Stopping tolerance on the relative iterate change.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Initial `A`; zero when absent.
    pub a0: Option<DenseMatrix>,
    /// Initial `B`; zero when absent.
    pub b0: Option<DenseMatrix>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            l0: 1.0,
            gamma: 2.0,
            epsilon: 1e-6,
            max_iter: 5000,
            a0: None,
            b0: None,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self { lambda, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(FamarError::InvalidConfig("lambda must be nonnegative".into()));
        }
        if !(self.l0 > 0.0) {
            return Err(FamarError::InvalidConfig("l0 must be positive".into()));
        }
        if !(self.gamma > 1.0) {
            return Err(FamarError::InvalidConfig("gamma must exceed 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(FamarError::InvalidConfig("epsilon must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(FamarError::InvalidConfig("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// A fitted matrix factor regression.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    /// Factor coefficient, `k1 x k2` (empty for the baseline).
    pub a_hat: DenseMatrix,
    /// Idiosyncratic coefficient, `p1 x p2`.
    pub b_hat: DenseMatrix,
    pub lambda: f64,
    pub iterations: usize,
    /// Objective value after each iteration; has `iterations` entries.
    pub objective_trace: Vec<f64>,
    /// Numerical rank of `b_hat` at relative tolerance `1e-8`.
    pub rank_b: usize,
    /// Whether the stopping criterion was met within `max_iter`.
    pub converged: bool,
    /// Final accepted backtracking step parameter, useful for warm starts.
    pub final_step: f64,
}

/// Objective of the nuclear-norm program:
/// `(2n)^{-1} sum_i (y_i - <A, F_i> - <B, U_i>)^2 + lambda ||B||_*`.
pub fn objective(a: &DenseMatrix, b: &DenseMatrix, data: &RegressionData, lambda: f64) -> f64 {
    let n = data.len() as f64;
    let mut sum = 0.0;
    for i in 0..data.len() {
        let resid = data.y[i] - a.dot(&data.f_panel[i]) - b.dot(&data.u_panel[i]);
        sum += resid * resid;
    }
    sum / (2.0 * n) + lambda * if lambda > 0.0 { nuclear_norm(b) } else { 0.0 }
}

/// Partial gradients of the smooth loss:
/// `grad_A = -n^{-1} sum_i r_i F_i` and `grad_B = -n^{-1} sum_i r_i U_i`
/// with `r_i` the residual.
pub fn gradients(
    a: &DenseMatrix,
    b: &DenseMatrix,
    data: &RegressionData,
) -> (DenseMatrix, DenseMatrix) {
    let n = data.len() as f64;
    let mut ga = DenseMatrix::zeros(a.nrows(), a.ncols());
    let mut gb = DenseMatrix::zeros(b.nrows(), b.ncols());
    for i in 0..data.len() {
        let resid = data.y[i] - a.dot(&data.f_panel[i]) - b.dot(&data.u_panel[i]);
        let scale = -resid / n;
        ga.zip_apply(&data.f_panel[i], |g, f| *g += scale * f);
        gb.zip_apply(&data.u_panel[i], |g, u| *g += scale * u);
    }
    (ga, gb)
}

fn initial_matrix(init: &Option<DenseMatrix>, rows: usize, cols: usize, name: &str) -> Result<DenseMatrix> {
    match init {
        None => Ok(DenseMatrix::zeros(rows, cols)),
        Some(m) => {
            if m.nrows() != rows || m.ncols() != cols {
                return Err(FamarError::DimensionMismatch(format!(
                    "initial {} is {}x{}, expected {}x{}",
                    name,
                    m.nrows(),
                    m.ncols(),
                    rows,
                    cols
                )));
            }
            Ok(m.clone())
        }
    }
}

/// Solves the nuclear-norm penalized program by accelerated proximal gradient
/// descent with backtracking.
///
/// Non-convergence within `max_iter` is reported through
/// [`RegressionFit::converged`], not as an error, so harnesses can aggregate
/// over many replications.
pub fn apgd_nuclear(data: &RegressionData, config: &SolverConfig) -> Result<RegressionFit> {
    config.validate()?;
    if data.is_empty() {
        return Err(FamarError::EmptyPanel);
    }
    let (k1, k2) = (data.f_panel.rows(), data.f_panel.cols());
    let (p1, p2) = (data.u_panel.rows(), data.u_panel.cols());
    let a0 = initial_matrix(&config.a0, k1, k2, "a0")?;
    let b0 = initial_matrix(&config.b0, p1, p2, "b0")?;
    let design = Design::from_data(data);
    let out = accelerated_solve(
        &design,
        Penalty::Nuclear { rows: p1, cols: p2 },
        config.lambda,
        &vectorize(&a0),
        &vectorize(&b0),
        config,
        StopRule::RelativeChange(config.epsilon),
    );
    let b_hat = unvectorize(&out.bv, p1, p2);
    let rank_b = effective_rank(&b_hat);
    Ok(RegressionFit {
        a_hat: unvectorize(&out.av, k1, k2),
        b_hat,
        lambda: config.lambda,
        iterations: out.iterations,
        objective_trace: out.trace,
        rank_b,
        converged: out.converged,
        final_step: out.final_step,
    })
}

/// Vanilla nuclear-penalized matrix regression of `y` on the covariate panel
/// itself: [`apgd_nuclear`] with an empty factor block.
pub fn fit_baseline_nuclear(
    y: &Vector,
    x_panel: &MatrixPanel,
    config: &SolverConfig,
) -> Result<RegressionFit> {
    let data = RegressionData::without_factors(y.clone(), x_panel.clone())?;
    apgd_nuclear(&data, config)
}

/// Solves the sparse program in two steps: `A` by OLS of `y` on the vectorized
/// factors, then `B` by an l1-penalized regression of the projection residual
/// on the vectorized idiosyncratics.
///
/// Requires `u_panel` to be orthogonal to the factor panel (the output of
/// [`crate::mfm::idiosyncratic_projection`]); otherwise the two steps do not
/// jointly solve the program and an error is returned. The lasso runs until
/// its duality gap falls below [`SPARSE_DUALITY_GAP`].
pub fn fit_sparse(data: &RegressionData, lambda: f64) -> Result<RegressionFit> {
    fit_sparse_with(data, &SolverConfig { lambda, max_iter: 20_000, ..SolverConfig::default() })
}

/// [`fit_sparse`] with explicit solver controls (`config.lambda` is the
/// penalty weight; `b0` warm-starts the lasso).
pub fn fit_sparse_with(data: &RegressionData, config: &SolverConfig) -> Result<RegressionFit> {
    config.validate()?;
    if data.is_empty() {
        return Err(FamarError::EmptyPanel);
    }
    let n = data.len();
    let (k1, k2) = (data.f_panel.rows(), data.f_panel.cols());
    let (p1, p2) = (data.u_panel.rows(), data.u_panel.cols());
    let ka = k1 * k2;
    let design = Design::from_data(data);

    // Step one: vec(A) = (F'F)^{-1} F'y on the vectorized factors.
    let (a_vec, y_tilde) = if ka > 0 {
        if n < ka {
            return Err(FamarError::InsufficientSamples(format!(
                "sparse path needs n >= k1*k2 ({} < {})",
                n, ka
            )));
        }
        design.check_factor_orthogonality()?;
        let a_vec = design.factor_ols()?;
        let mut resid = design.y.clone();
        resid.gemv_tr(-1.0, &design.ft, &a_vec, 1.0);
        (a_vec, resid)
    } else {
        (Vector::zeros(0), design.y.clone())
    };

    // Step two: lasso of the projected response on the idiosyncratics.
    let lasso_design = Design {
        y: y_tilde,
        ft: DenseMatrix::zeros(0, n),
        ut: design.ut,
    };
    let b0 = initial_matrix(&config.b0, p1, p2, "b0")?;
    // at lambda = 0 the program is least squares and the lasso dual
    // certificate degenerates, so fall back to the iterate-change rule
    let stop = if config.lambda > 0.0 {
        StopRule::DualityGap(SPARSE_DUALITY_GAP)
    } else {
        StopRule::RelativeChange(config.epsilon)
    };
    let out = accelerated_solve(
        &lasso_design,
        Penalty::EntrywiseL1,
        config.lambda,
        &Vector::zeros(0),
        &vectorize(&b0),
        config,
        stop,
    );
    let b_hat = unvectorize(&out.bv, p1, p2);
    let rank_b = effective_rank(&b_hat);
    Ok(RegressionFit {
        a_hat: unvectorize(&a_vec, k1, k2),
        b_hat,
        lambda: config.lambda,
        iterations: out.iterations,
        objective_trace: out.trace,
        rank_b,
        converged: out.converged,
        final_step: out.final_step,
    })
}

/// OLS of `y` on the vectorized factor panel alone. The idiosyncratic
/// coefficient is the empty `0 x 0` matrix, so the fit composes with
/// [`predict`] given empty idiosyncratic panels.
pub fn fit_factors_ols(y: &Vector, f_panel: &MatrixPanel) -> Result<RegressionFit> {
    let ka = f_panel.rows() * f_panel.cols();
    if y.len() < ka {
        return Err(FamarError::InsufficientSamples(format!(
            "factor OLS needs n >= k1*k2 ({} < {})",
            y.len(),
            ka
        )));
    }
    let data = RegressionData::new(
        y.clone(),
        f_panel.clone(),
        MatrixPanel::zeros(f_panel.len(), 0, 0)?,
    )?;
    let design = Design::from_data(&data);
    let a_vec = design.factor_ols()?;
    Ok(RegressionFit {
        a_hat: unvectorize(&a_vec, f_panel.rows(), f_panel.cols()),
        b_hat: DenseMatrix::zeros(0, 0),
        lambda: 0.0,
        iterations: 0,
        objective_trace: vec![],
        rank_b: 0,
        converged: true,
        final_step: 1.0,
    })
}

/// Forward predictions `y_i = <A, F_i> + <B, U_i>`.
pub fn predict(fit: &RegressionFit, f_new: &MatrixPanel, u_new: &MatrixPanel) -> Result<Vector> {
    if f_new.len() != u_new.len() {
        return Err(FamarError::DimensionMismatch(format!(
            "factor panel has {} samples, idiosyncratic panel {}",
            f_new.len(),
            u_new.len()
        )));
    }
    if f_new.rows() != fit.a_hat.nrows()
        || f_new.cols() != fit.a_hat.ncols()
        || u_new.rows() != fit.b_hat.nrows()
        || u_new.cols() != fit.b_hat.ncols()
    {
        return Err(FamarError::DimensionMismatch(
            "prediction panels do not match the fitted coefficient shapes".into(),
        ));
    }
    Ok(Vector::from_iterator(
        f_new.len(),
        f_new
            .iter()
            .zip(u_new.iter())
            .map(|(f, u)| fit.a_hat.dot(f) + fit.b_hat.dot(u)),
    ))
}

/// Smallest penalty that annihilates `B` on the nuclear path: the spectral
/// norm of `grad_B` at `(A_ols, 0)`, where `A_ols` regresses `y` on the
/// vectorized factors alone.
pub fn nuclear_null_threshold(data: &RegressionData) -> Result<f64> {
    let design = Design::from_data(data);
    let resid = design.factor_residual()?;
    let grad = design.grad_b_matrix(&resid, data.u_panel.rows(), data.u_panel.cols());
    Ok(crate::kernels::singular_values(&grad).max())
}

/// Smallest penalty that annihilates `B` on the sparse path:
/// `max |U' y_tilde| / n` with `y_tilde` the factor-projection residual.
pub fn sparse_null_threshold(data: &RegressionData) -> Result<f64> {
    let design = Design::from_data(data);
    let resid = design.factor_residual()?;
    let mut grad = Vector::zeros(design.ut.nrows());
    grad.gemv(1.0 / data.len() as f64, &design.ut, &resid, 0.0);
    Ok(grad.amax())
}

/// Log-spaced penalty grid `frac * lambda_max` for `frac` descending from
/// `1` to `min_frac`, inclusive.
pub fn log_lambda_grid(lambda_max: f64, points: usize, min_frac: f64) -> Vec<f64> {
    assert!(points >= 1);
    assert!(min_frac > 0.0 && min_frac <= 1.0);
    if points == 1 {
        return vec![lambda_max];
    }
    let log_min = min_frac.ln();
    (0..points)
        .map(|i| lambda_max * (log_min * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Default cross-validation grid: 20 log-spaced points on
/// `[1e-4, 1] * lambda_max`, descending.
pub fn default_lambda_grid(lambda_max: f64) -> Vec<f64> {
    log_lambda_grid(lambda_max, 20, 1e-4)
}
