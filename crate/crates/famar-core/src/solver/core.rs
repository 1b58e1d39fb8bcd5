//! Shared accelerated proximal gradient core.
//!
//! Both penalized paths run the same loop: gradient step at a momentum search
//! point, proximal map of the penalty, backtracking that grows the step
//! parameter `L` by `gamma` until the smooth loss is majorized at the
//! candidate, and the weighting sequence
//! `alpha_{k+1} = (1 + sqrt(1 + 4 alpha_k^2)) / 2`.
//!
//! Everything here is sequential and deterministic; concurrency lives at the
//! replication level of the harness.

use crate::error::{FamarError, Result};
use crate::kernels::sorted_symmetric_eigen;
use crate::panel::{DenseMatrix, Vector};
use crate::solver::SolverConfig;

/// Vectorized regression design with samples stored as columns, so both the
/// forward product and the gradient product stream memory contiguously.
pub(crate) struct Design {
    pub y: Vector,
    /// `k1 k2 x n`; column `i` is `vec(F_i)`.
    pub ft: DenseMatrix,
    /// `p1 p2 x n`; column `i` is `vec(U_i)`.
    pub ut: DenseMatrix,
}

impl Design {
    pub fn from_data(data: &crate::solver::RegressionData) -> Self {
        let n = data.len();
        let ka = data.f_panel.rows() * data.f_panel.cols();
        let kb = data.u_panel.rows() * data.u_panel.cols();
        let mut ft = DenseMatrix::zeros(ka, n);
        let mut ut = DenseMatrix::zeros(kb, n);
        for i in 0..n {
            ft.column_mut(i).copy_from_slice(data.f_panel[i].as_slice());
            ut.column_mut(i).copy_from_slice(data.u_panel[i].as_slice());
        }
        Design { y: data.y.clone(), ft, ut }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// `r = y - F'a - U'b` in the vectorized coordinates.
    fn residual_into(&self, av: &Vector, bv: &Vector, r: &mut Vector) {
        r.copy_from(&self.y);
        if self.ft.nrows() > 0 {
            r.gemv_tr(-1.0, &self.ft, av, 1.0);
        }
        r.gemv_tr(-1.0, &self.ut, bv, 1.0);
    }

    fn grad_into(&self, r: &Vector, ga: &mut Vector, gb: &mut Vector) {
        let scale = -1.0 / self.n() as f64;
        if self.ft.nrows() > 0 {
            ga.gemv(scale, &self.ft, r, 0.0);
        }
        gb.gemv(scale, &self.ut, r, 0.0);
    }

    /// Gram matrix of the factor block, its inverse applied to `F'y`.
    pub fn factor_ols(&self) -> Result<Vector> {
        let ka = self.ft.nrows();
        let gram = &self.ft * self.ft.transpose();
        let (values, vectors) = sorted_symmetric_eigen(gram);
        let top = values[0];
        let bottom = values[ka - 1];
        if !(top > 0.0) || bottom <= 0.0 || top / bottom > 1e12 {
            let cond = if bottom > 0.0 { top / bottom } else { f64::INFINITY };
            return Err(FamarError::SingularGram { cond });
        }
        let mut fy = Vector::zeros(ka);
        fy.gemv(1.0, &self.ft, &self.y, 0.0);
        let coeffs = vectors.transpose() * fy;
        let scaled = Vector::from_iterator(ka, coeffs.iter().zip(&values).map(|(c, v)| c / v));
        Ok(vectors * scaled)
    }

    /// Residual of `y` after removing the factor OLS fit; `y` itself when the
    /// factor block is empty.
    pub fn factor_residual(&self) -> Result<Vector> {
        if self.ft.nrows() == 0 {
            return Ok(self.y.clone());
        }
        let a = self.factor_ols()?;
        let mut r = self.y.clone();
        r.gemv_tr(-1.0, &self.ft, &a, 1.0);
        Ok(r)
    }

    /// `-n^{-1} U' r` reshaped to coefficient-matrix form, negated to the
    /// gradient sign convention... the raw cross moment `n^{-1} sum r_i U_i`.
    pub fn grad_b_matrix(&self, r: &Vector, rows: usize, cols: usize) -> DenseMatrix {
        let mut g = Vector::zeros(self.ut.nrows());
        g.gemv(1.0 / self.n() as f64, &self.ut, r, 0.0);
        crate::kernels::unvectorize(&g, rows, cols)
    }

    /// Errors unless the factor and idiosyncratic blocks are orthogonal,
    /// which the sparse two-step path relies on.
    pub fn check_factor_orthogonality(&self) -> Result<()> {
        if self.ft.nrows() == 0 {
            return Ok(());
        }
        let cross = &self.ft * self.ut.transpose();
        let scale = self.ft.amax() * self.ut.amax() * self.n() as f64;
        if cross.amax() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
            return Err(FamarError::InvalidConfig(
                "u_panel is not orthogonal to the factor panel; use the projection-mode \
                 idiosyncratic estimator for the sparse path"
                    .into(),
            ));
        }
        Ok(())
    }
}

pub(crate) enum Penalty {
    /// Nuclear norm on the coefficient reshaped to `rows x cols`.
    Nuclear { rows: usize, cols: usize },
    /// l1 norm on the vectorized coefficient.
    EntrywiseL1,
}

impl Penalty {
    /// Proximal map of `t * penalty` and the penalty value at the output.
    fn prox(&self, v: &Vector, t: f64) -> (Vector, f64) {
        match *self {
            Penalty::EntrywiseL1 => {
                let out = v.map(|x| {
                    if x > t {
                        x - t
                    } else if x < -t {
                        x + t
                    } else {
                        0.0
                    }
                });
                let norm1 = out.iter().map(|x| x.abs()).sum();
                (out, norm1)
            }
            Penalty::Nuclear { rows, cols } => {
                let m = crate::kernels::unvectorize(v, rows, cols);
                let (out, nuc) = prox_nuclear(&m, t);
                (crate::kernels::vectorize(&out), nuc)
            }
        }
    }
}

/// Singular-value thresholding computed through the symmetric
/// eigendecomposition of the smaller Gram matrix. Equivalent to the
/// full-SVD operator in `kernels::svt` (tested against it) but roughly an
/// order of magnitude faster inside the solver loop. Returns the thresholded
/// matrix and its nuclear norm.
fn prox_nuclear(m: &DenseMatrix, t: f64) -> (DenseMatrix, f64) {
    let (p1, p2) = m.shape();
    if t == 0.0 {
        let nuc = crate::kernels::nuclear_norm(m);
        return (m.clone(), nuc);
    }
    if p2 <= p1 {
        let gram = m.tr_mul(m);
        let (values, vectors) = sorted_symmetric_eigen(gram);
        let sigma: Vec<f64> = values.iter().map(|v| v.max(0.0).sqrt()).collect();
        let kept = sigma.iter().take_while(|&&s| s > t).count();
        if kept == 0 {
            return (DenseMatrix::zeros(p1, p2), 0.0);
        }
        let vk = vectors.columns(0, kept).into_owned();
        let mut scaled = vk.clone();
        for j in 0..kept {
            scaled.column_mut(j).scale_mut(1.0 - t / sigma[j]);
        }
        let out = m * scaled * vk.transpose();
        let nuc = sigma[..kept].iter().map(|s| s - t).sum();
        (out, nuc)
    } else {
        let gram = m * m.transpose();
        let (values, vectors) = sorted_symmetric_eigen(gram);
        let sigma: Vec<f64> = values.iter().map(|v| v.max(0.0).sqrt()).collect();
        let kept = sigma.iter().take_while(|&&s| s > t).count();
        if kept == 0 {
            return (DenseMatrix::zeros(p1, p2), 0.0);
        }
        let uk = vectors.columns(0, kept).into_owned();
        let mut scaled = uk.clone();
        for j in 0..kept {
            scaled.column_mut(j).scale_mut(1.0 - t / sigma[j]);
        }
        let out = scaled * (uk.transpose() * m);
        let nuc = sigma[..kept].iter().map(|s| s - t).sum();
        (out, nuc)
    }
}

pub(crate) enum StopRule {
    /// Stop once
    /// `||dB||_F / (1 + ||B||_F) + ||dA||_F / (1 + ||A||_F) < epsilon`.
    RelativeChange(f64),
    /// Stop once the lasso duality gap falls below the tolerance.
    DualityGap(f64),
}

pub(crate) struct CoreResult {
    pub av: Vector,
    pub bv: Vector,
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub converged: bool,
    pub final_step: f64,
}

/// Duality gap of the l1 program
/// `(2n)^{-1} ||y - U'b||^2 + lambda ||b||_1` at the point with residual `r`.
fn l1_duality_gap(design: &Design, r: &Vector, lambda: f64, primal: f64) -> f64 {
    let n = design.n() as f64;
    let mut corr = Vector::zeros(design.ut.nrows());
    corr.gemv(1.0 / n, &design.ut, r, 0.0);
    let max_corr = corr.amax();
    let scale = if max_corr > lambda { lambda / max_corr } else { 1.0 };
    // theta = scale * r / n, feasible for ||U theta||_inf <= lambda
    let ss = scale * scale;
    let r_norm2 = r.norm_squared();
    let y_norm2 = design.y.norm_squared();
    // D(theta) = ||y||^2/(2n) - (n/2) ||theta - y/n||^2
    let dual = y_norm2 / (2.0 * n)
        - (ss * r_norm2 - 2.0 * scale * r.dot(&design.y) + y_norm2) / (2.0 * n);
    primal - dual
}

/// One accelerated proximal gradient solve. `av0`/`bv0` are vectorized
/// initial values; `lambda` multiplies the penalty.
pub(crate) fn accelerated_solve(
    design: &Design,
    penalty: Penalty,
    lambda: f64,
    av0: &Vector,
    bv0: &Vector,
    config: &SolverConfig,
    stop: StopRule,
) -> CoreResult {
    let n = design.n() as f64;
    let (ka, kb) = (design.ft.nrows(), design.ut.nrows());
    debug_assert_eq!(av0.len(), ka);
    debug_assert_eq!(bv0.len(), kb);

    let mut av = av0.clone();
    let mut bv = bv0.clone();
    // search points start at the initial iterate
    let mut qv = av.clone();
    let mut pv = bv.clone();

    let mut r_iter = Vector::zeros(design.n());
    design.residual_into(&av, &bv, &mut r_iter);
    let mut r_prev = r_iter.clone();
    let mut r_search = r_iter.clone();

    let mut ga = Vector::zeros(ka);
    let mut gb = Vector::zeros(kb);
    let mut r_cand = Vector::zeros(design.n());

    let mut alpha = 1.0f64;
    let mut step = config.l0;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _k in 1..=config.max_iter {
        design.grad_into(&r_search, &mut ga, &mut gb);
        let f_search = r_search.norm_squared() / (2.0 * n);

        // Backtracking: grow the step parameter until the smooth loss at the
        // candidate is majorized by its quadratic model at the search point.
        let mut l_bar = step;
        let (cand_av, cand_bv, pen_val, f_cand);
        loop {
            let thresh = lambda / l_bar;
            let bv_step = &pv - &gb / l_bar;
            let (b_proxed, pen) = penalty.prox(&bv_step, thresh);
            let a_step = &qv - &ga / l_bar;
            design.residual_into(&a_step, &b_proxed, &mut r_cand);
            let f_new = r_cand.norm_squared() / (2.0 * n);
            let db = &b_proxed - &pv;
            let da = &a_step - &qv;
            let model = f_search
                + db.dot(&gb)
                + 0.5 * l_bar * db.norm_squared()
                + da.dot(&ga)
                + 0.5 * l_bar * da.norm_squared();
            let slack = 1e-12 * (1.0 + f_search.abs());
            if f_new <= model + slack || l_bar > 1e60 {
                debug_assert!(
                    f_new <= model + slack.max(1e-9 * (1.0 + f_search.abs())),
                    "accepted step violates the majorization"
                );
                cand_av = a_step;
                cand_bv = b_proxed;
                pen_val = pen;
                f_cand = f_new;
                break;
            }
            l_bar *= config.gamma;
        }
        step = l_bar;

        let stop_val = {
            let db_norm = (&cand_bv - &bv).norm();
            let da_norm = (&cand_av - &av).norm();
            db_norm / (1.0 + bv.norm()) + da_norm / (1.0 + av.norm())
        };

        std::mem::swap(&mut r_prev, &mut r_iter);
        r_iter.copy_from(&r_cand);
        let av_old = std::mem::replace(&mut av, cand_av);
        let bv_old = std::mem::replace(&mut bv, cand_bv);
        trace.push(f_cand + lambda * pen_val);
        iterations += 1;

        let done = match stop {
            StopRule::RelativeChange(eps) => stop_val < eps,
            StopRule::DualityGap(tol) => {
                let primal = f_cand + lambda * pen_val;
                l1_duality_gap(design, &r_iter, lambda, primal) <= tol
            }
        };
        if done {
            converged = true;
            break;
        }

        let alpha_next = 0.5 * (1.0 + (1.0 + 4.0 * alpha * alpha).sqrt());
        let beta = (alpha - 1.0) / alpha_next;
        alpha = alpha_next;

        // search point and its residual; the residual is affine in the
        // iterates, so no extra design sweep is needed
        pv = &bv + (&bv - &bv_old) * beta;
        qv = &av + (&av - &av_old) * beta;
        r_search.copy_from(&r_iter);
        r_search.axpy(beta, &r_iter, 1.0);
        r_search.axpy(-beta, &r_prev, 1.0);
    }

    CoreResult { av, bv, iterations, trace, converged, final_step: step }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{svt, unvectorize, vectorize};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn fast_prox_matches_full_svd_thresholding() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for &(r, c) in &[(4usize, 3usize), (3, 5), (6, 6), (1, 4)] {
            let data: Vec<f64> = (0..r * c).map(|_| rng.sample(StandardNormal)).collect();
            let m = DenseMatrix::from_column_slice(r, c, &data);
            for &t in &[0.0, 0.05, 0.4, 1.1, 10.0] {
                let (fast, nuc) = prox_nuclear(&m, t);
                let slow = svt(&m, t).unwrap();
                assert_abs_diff_eq!(fast, slow, epsilon = 1e-9);
                let nuc_slow: f64 = crate::kernels::singular_values(&slow).iter().sum();
                assert_abs_diff_eq!(nuc, nuc_slow, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn l1_prox_soft_thresholds() {
        let v = Vector::from_column_slice(&[1.5, -0.2, 0.2, -3.0]);
        let (out, norm1) = Penalty::EntrywiseL1.prox(&v, 0.5);
        assert_eq!(out.as_slice(), &[1.0, 0.0, 0.0, -2.5]);
        assert_abs_diff_eq!(norm1, 3.5, epsilon = 1e-15);
    }

    #[test]
    fn design_roundtrip_residual() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let n = 7;
        let f_mats: Vec<DenseMatrix> = (0..n)
            .map(|_| {
                DenseMatrix::from_fn(2, 2, |_, _| rng.sample::<f64, _>(StandardNormal))
            })
            .collect();
        let u_mats: Vec<DenseMatrix> = (0..n)
            .map(|_| {
                DenseMatrix::from_fn(3, 2, |_, _| rng.sample::<f64, _>(StandardNormal))
            })
            .collect();
        let y = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let data = crate::solver::RegressionData::new(
            y.clone(),
            crate::panel::MatrixPanel::new(f_mats.clone()).unwrap(),
            crate::panel::MatrixPanel::new(u_mats.clone()).unwrap(),
        )
        .unwrap();
        let design = Design::from_data(&data);
        let a = DenseMatrix::from_fn(2, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DenseMatrix::from_fn(3, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut r = Vector::zeros(n);
        design.residual_into(&vectorize(&a), &vectorize(&b), &mut r);
        for i in 0..n {
            let expected = y[i] - a.dot(&f_mats[i]) - b.dot(&u_mats[i]);
            assert_abs_diff_eq!(r[i], expected, epsilon = 1e-12);
        }
        // gradient agrees with the panel-space formula
        let mut ga = Vector::zeros(4);
        let mut gb = Vector::zeros(6);
        design.grad_into(&r, &mut ga, &mut gb);
        let (ga_panel, gb_panel) = crate::solver::gradients(&a, &b, &data);
        assert_abs_diff_eq!(unvectorize(&ga, 2, 2), ga_panel, epsilon = 1e-12);
        assert_abs_diff_eq!(unvectorize(&gb, 3, 2), gb_panel, epsilon = 1e-12);
    }

    #[test]
    fn empty_factor_block_is_handled() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let n = 5;
        let u_mats: Vec<DenseMatrix> = (0..n)
            .map(|_| {
                DenseMatrix::from_fn(2, 2, |_, _| rng.sample::<f64, _>(StandardNormal))
            })
            .collect();
        let y = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let data = crate::solver::RegressionData::without_factors(
            y,
            crate::panel::MatrixPanel::new(u_mats).unwrap(),
        )
        .unwrap();
        let design = Design::from_data(&data);
        let mut r = Vector::zeros(n);
        design.residual_into(&Vector::zeros(0), &Vector::zeros(4), &mut r);
        assert_abs_diff_eq!(r, data.y, epsilon = 1e-15);
    }
}
