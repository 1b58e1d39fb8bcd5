//! Matrix factor model estimation.
//!
//! The pipeline is non-iterative: diversified projection matrices are learned
//! from an independent pre-training split, factors are recovered by a single
//! projection per sample, the vectorized loading is fitted by OLS, the loading
//! matrices are refined by Kronecker block averaging, and the idiosyncratic
//! panel is recovered by subtracting the reconstructed common component.

use crate::error::{FamarError, Result};
use crate::kernels::{sorted_symmetric_eigen, unvectorize, vectorize};
use crate::panel::{DenseMatrix, MatrixPanel, Vector};

/// Relative eigenvalue floor below which the pre-training spectrum is treated
/// as degenerate.
const SPECTRUM_REL_FLOOR: f64 = 1e-14;

/// Relative condition-number ceiling for the factor Gram matrix.
const GRAM_COND_LIMIT: f64 = 1e12;

/// Absolute floor for the averaging-scale product `c_s * r_s`.
const SCALE_FLOOR: f64 = 1e-10;

/// Diversified projection matrices `W1` (p1 x k1) and `W2` (p2 x k2).
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    pub w1: DenseMatrix,
    pub w2: DenseMatrix,
}

impl ProjectionPair {
    pub fn new(w1: DenseMatrix, w2: DenseMatrix) -> Result<Self> {
        for (name, w) in [("w1", &w1), ("w2", &w2)] {
            if !w.iter().all(|v| v.is_finite()) {
                return Err(FamarError::NonFinite(format!("projection {}", name)));
            }
            for j in 0..w.ncols() {
                if w.column(j).norm() == 0.0 {
                    return Err(FamarError::InvalidConfig(format!(
                        "projection {} has an all-zero column {}",
                        name, j
                    )));
                }
            }
        }
        Ok(Self { w1, w2 })
    }

    pub fn k1(&self) -> usize {
        self.w1.ncols()
    }

    pub fn k2(&self) -> usize {
        self.w2.ncols()
    }

    pub fn p1(&self) -> usize {
        self.w1.nrows()
    }

    pub fn p2(&self) -> usize {
        self.w2.nrows()
    }
}

/// How the idiosyncratic panel is recovered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UMode {
    /// Subtract the block-averaged Kronecker reconstruction of the common
    /// component.
    Kronecker,
    /// Residual of the vectorized panel after projecting out the fitted
    /// factor columns; exactly orthogonal to the factors.
    Projection,
}

/// Options for [`fit_mfm`].
#[derive(Debug, Clone, Copy)]
pub struct MfmOptions {
    /// Demean panels entrywise (pre-training split by its own mean, the
    /// estimation split by its own mean) before estimating. Real data rarely
    /// is mean zero; synthetic mean-zero data can turn this off.
    pub demean: bool,
    pub u_mode: UMode,
}

impl Default for MfmOptions {
    fn default() -> Self {
        Self {
            demean: true,
            u_mode: UMode::Kronecker,
        }
    }
}

/// A fitted matrix factor model.
#[derive(Debug, Clone)]
pub struct MfmFit {
    pub projections: ProjectionPair,
    /// Estimated factor panel, n matrices of shape k1 x k2.
    pub f_hat: MatrixPanel,
    /// Vectorized OLS loading, p1 p2 x k1 k2.
    pub gamma_tilde: DenseMatrix,
    /// Block-averaged row loading, p1 x k1.
    pub r_hat: DenseMatrix,
    /// Block-averaged column loading, p2 x k2.
    pub c_hat: DenseMatrix,
    /// Grand mean of the entries of `c_hat`.
    pub c_s: f64,
    /// Grand mean of the entries of `r_hat`.
    pub r_s: f64,
    /// Recovered idiosyncratic panel, n matrices of shape p1 x p2.
    pub u_hat: MatrixPanel,
    pub u_hat_mode: UMode,
    /// Entrywise mean removed from the estimation panel, when demeaning ran.
    pub panel_mean: Option<DenseMatrix>,
}

impl MfmFit {
    /// The scale that converts `r_hat * F * c_hat'` into a common-component
    /// estimate. Both `c_s` and `r_s` estimate the same scalar (the product of
    /// the grand means of the rotated loadings), so their average is used.
    pub fn averaging_scale(&self) -> f64 {
        0.5 * (self.c_s + self.r_s)
    }

    /// Reconstructed common component for one factor matrix.
    pub fn common_component(&self, f: &DenseMatrix) -> DenseMatrix {
        (&self.r_hat * f * self.c_hat.transpose()) / self.averaging_scale()
    }

    /// Projects factor estimates for new samples, applying the same demeaning
    /// as the training pipeline.
    pub fn project_new(&self, panel: &MatrixPanel) -> Result<MatrixPanel> {
        let centered = match &self.panel_mean {
            Some(mean) => panel.shifted_by(mean)?,
            None => panel.clone(),
        };
        project_factors(&centered, &self.projections)
    }

    /// Recovers idiosyncratic estimates for new samples with the factor
    /// estimates from [`MfmFit::project_new`], using the fitted loadings.
    pub fn idiosyncratic_new(
        &self,
        panel: &MatrixPanel,
        f_hat_new: &MatrixPanel,
    ) -> Result<MatrixPanel> {
        let centered = match &self.panel_mean {
            Some(mean) => panel.shifted_by(mean)?,
            None => panel.clone(),
        };
        match self.u_hat_mode {
            UMode::Kronecker => {
                idiosyncratic_from_loadings(&centered, f_hat_new, &self.r_hat, &self.c_hat, self.averaging_scale())
            }
            UMode::Projection => {
                idiosyncratic_from_gamma(&centered, f_hat_new, &self.gamma_tilde)
            }
        }
    }
}

/// Flips each column so its largest-magnitude entry is positive. The earliest
/// index wins ties, which makes the projection output reproducible.
fn normalize_column_signs(m: &mut DenseMatrix) {
    for mut col in m.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

fn top_scaled_eigenvectors(s: &DenseMatrix, k: usize, scale: f64) -> Result<DenseMatrix> {
    let p = s.nrows();
    if k > p {
        return Err(FamarError::FactorDimension { k, p });
    }
    let (values, vectors) = sorted_symmetric_eigen(s.clone());
    let top = values[0];
    if !(top > 0.0) {
        return Err(FamarError::DegenerateSpectrum { k });
    }
    if values[k - 1] <= SPECTRUM_REL_FLOOR * top {
        return Err(FamarError::DegenerateSpectrum { k });
    }
    let mut w = vectors.columns(0, k).into_owned();
    normalize_column_signs(&mut w);
    Ok(w * scale)
}

/// Builds diversified projection matrices from a pre-training split.
///
/// `S1 = (p1 p2 n')^{-1} sum_i X_i X_i'` and `S2 = (p1 p2 n')^{-1} sum_i X_i' X_i`
/// are accumulated in sample order; `W_j` is `sqrt(p_j)` times the top `k_j`
/// eigenvectors of `S_j`, with column signs normalized so the
/// largest-magnitude entry is positive.
///
/// The pre-training split must be disjoint from the estimation split; the
/// caller is responsible for that (for time series, take an initial segment).
pub fn pretrain_projections(pretrain: &MatrixPanel, k1: usize, k2: usize) -> Result<ProjectionPair> {
    let (p1, p2, n) = (pretrain.rows(), pretrain.cols(), pretrain.len());
    if k1 == 0 || k2 == 0 {
        return Err(FamarError::InvalidConfig("factor dimensions must be positive".into()));
    }
    if k1 > p1 {
        return Err(FamarError::FactorDimension { k: k1, p: p1 });
    }
    if k2 > p2 {
        return Err(FamarError::FactorDimension { k: k2, p: p2 });
    }
    let denom = (p1 * p2 * n) as f64;
    let mut s1 = DenseMatrix::zeros(p1, p1);
    let mut s2 = DenseMatrix::zeros(p2, p2);
    for x in pretrain.iter() {
        let xt = x.transpose();
        s1 += x * &xt;
        s2 += &xt * x;
    }
    s1 /= denom;
    s2 /= denom;
    let w1 = top_scaled_eigenvectors(&s1, k1, (p1 as f64).sqrt())?;
    let w2 = top_scaled_eigenvectors(&s2, k2, (p2 as f64).sqrt())?;
    ProjectionPair::new(w1, w2)
}

/// One-shot factor estimates `F_i = (p1 p2)^{-1} W1' X_i W2`.
pub fn project_factors(panel: &MatrixPanel, proj: &ProjectionPair) -> Result<MatrixPanel> {
    if panel.rows() != proj.p1() || panel.cols() != proj.p2() {
        return Err(FamarError::DimensionMismatch(format!(
            "panel is {}x{}, projections expect {}x{}",
            panel.rows(),
            panel.cols(),
            proj.p1(),
            proj.p2()
        )));
    }
    let scale = 1.0 / (proj.p1() * proj.p2()) as f64;
    let w1t = proj.w1.transpose();
    let mats = panel
        .iter()
        .map(|x| (&w1t * x * &proj.w2) * scale)
        .collect();
    Ok(MatrixPanel::from_parts_unchecked(proj.k1(), proj.k2(), mats))
}

/// Gram matrix of the vectorized factor panel and its cross-moment with the
/// vectorized covariate panel, accumulated in sample order.
fn factor_moments(panel: &MatrixPanel, f_hat: &MatrixPanel) -> (DenseMatrix, DenseMatrix) {
    let m = panel.rows() * panel.cols();
    let k = f_hat.rows() * f_hat.cols();
    let mut cross = DenseMatrix::zeros(m, k);
    let mut gram = DenseMatrix::zeros(k, k);
    for (x, f) in panel.iter().zip(f_hat.iter()) {
        let fv = vectorize(f);
        let xv = vectorize(x);
        // cross += xv fv', gram += fv fv'
        cross.ger(1.0, &xv, &fv, 1.0);
        gram.ger(1.0, &fv, &fv, 1.0);
    }
    (gram, cross)
}

/// Inverts a symmetric positive definite Gram matrix through its
/// eigendecomposition, surfacing ill-conditioning as an error.
fn gram_inverse(gram: &DenseMatrix) -> Result<DenseMatrix> {
    let (values, vectors) = sorted_symmetric_eigen(gram.clone());
    let top = values[0];
    let bottom = *values.last().expect("nonempty spectrum");
    if !(top > 0.0) || bottom <= 0.0 || top / bottom > GRAM_COND_LIMIT {
        let cond = if bottom > 0.0 { top / bottom } else { f64::INFINITY };
        return Err(FamarError::SingularGram { cond });
    }
    let mut scaled = vectors.clone();
    for (j, v) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / v);
    }
    Ok(scaled * vectors.transpose())
}

/// OLS loading of the vectorized model: `Gamma = X' F (F' F)^{-1}` with the
/// samples stacked in rows. Returns a `p1 p2 x k1 k2` matrix.
pub fn ols_loading(panel: &MatrixPanel, f_hat: &MatrixPanel) -> Result<DenseMatrix> {
    let n = panel.len();
    if f_hat.len() != n {
        return Err(FamarError::DimensionMismatch(format!(
            "panel has {} samples, factors have {}",
            n,
            f_hat.len()
        )));
    }
    let k = f_hat.rows() * f_hat.cols();
    if n < k {
        return Err(FamarError::InsufficientSamples(format!(
            "OLS loading needs n >= k1*k2 ({} < {})",
            n, k
        )));
    }
    let (gram, cross) = factor_moments(panel, f_hat);
    let inv = gram_inverse(&gram)?;
    Ok(cross * inv)
}

/// Result of Kronecker block averaging of the vectorized loading.
#[derive(Debug, Clone)]
pub struct BlockAverage {
    pub r_hat: DenseMatrix,
    pub c_hat: DenseMatrix,
    /// Grand mean of `c_hat`.
    pub c_s: f64,
    /// Grand mean of `r_hat`.
    pub r_s: f64,
}

/// Averages the `p2 k2` blocks of the vectorized loading into the row loading
/// and the entrywise block means into the column loading.
///
/// Writing the loading as `p2 x k2` blocks of size `p1 x k1`:
/// `r_hat[a, b]` is the mean of entry `(a, b)` across blocks, and
/// `c_hat[c, d]` is the mean of all entries of block `(c, d)`. For a loading
/// exactly of the form `C ⊗ R` this returns `(mean(C) R, mean(R) C)`.
pub fn block_average(
    gamma_tilde: &DenseMatrix,
    p1: usize,
    p2: usize,
    k1: usize,
    k2: usize,
) -> Result<BlockAverage> {
    if gamma_tilde.nrows() != p1 * p2 || gamma_tilde.ncols() != k1 * k2 {
        return Err(FamarError::DimensionMismatch(format!(
            "loading is {}x{}, expected {}x{}",
            gamma_tilde.nrows(),
            gamma_tilde.ncols(),
            p1 * p2,
            k1 * k2
        )));
    }
    let mut r_hat = DenseMatrix::zeros(p1, k1);
    let mut c_hat = DenseMatrix::zeros(p2, k2);
    for d in 0..k2 {
        for c in 0..p2 {
            let mut block_sum = 0.0;
            for b in 0..k1 {
                for a in 0..p1 {
                    let v = gamma_tilde[(c * p1 + a, d * k1 + b)];
                    r_hat[(a, b)] += v;
                    block_sum += v;
                }
            }
            c_hat[(c, d)] = block_sum / (p1 * k1) as f64;
        }
    }
    r_hat /= (p2 * k2) as f64;
    let r_s = r_hat.iter().sum::<f64>() / (p1 * k1) as f64;
    let c_s = c_hat.iter().sum::<f64>() / (p2 * k2) as f64;
    Ok(BlockAverage { r_hat, c_hat, c_s, r_s })
}

fn idiosyncratic_from_loadings(
    panel: &MatrixPanel,
    f_hat: &MatrixPanel,
    r_hat: &DenseMatrix,
    c_hat: &DenseMatrix,
    scale: f64,
) -> Result<MatrixPanel> {
    if panel.len() != f_hat.len() {
        return Err(FamarError::DimensionMismatch(format!(
            "panel has {} samples, factors have {}",
            panel.len(),
            f_hat.len()
        )));
    }
    let ct = c_hat.transpose();
    let mats = panel
        .iter()
        .zip(f_hat.iter())
        .map(|(x, f)| x - (r_hat * f * &ct) / scale)
        .collect();
    Ok(MatrixPanel::from_parts_unchecked(panel.rows(), panel.cols(), mats))
}

/// Idiosyncratic recovery by subtracting the block-averaged common component:
/// `U_i = X_i - r_hat F_i c_hat' / s`, with `s` the averaging scale.
///
/// Errors when the averaging scale is degenerate, which signals failed
/// identification (the grand mean of a rotated loading is near zero).
pub fn idiosyncratic_kron(panel: &MatrixPanel, fit: &MfmFit) -> Result<MatrixPanel> {
    check_averaging_scale(fit.c_s, fit.r_s)?;
    idiosyncratic_from_loadings(panel, &fit.f_hat, &fit.r_hat, &fit.c_hat, fit.averaging_scale())
}

fn check_averaging_scale(c_s: f64, r_s: f64) -> Result<()> {
    let product = c_s * r_s;
    let scale = 0.5 * (c_s + r_s);
    if product.abs() <= SCALE_FLOOR || scale.abs() <= SCALE_FLOOR {
        return Err(FamarError::DegenerateScale(product.abs()));
    }
    Ok(())
}

fn idiosyncratic_from_gamma(
    panel: &MatrixPanel,
    f_hat: &MatrixPanel,
    gamma_tilde: &DenseMatrix,
) -> Result<MatrixPanel> {
    if panel.len() != f_hat.len() {
        return Err(FamarError::DimensionMismatch(format!(
            "panel has {} samples, factors have {}",
            panel.len(),
            f_hat.len()
        )));
    }
    let (p1, p2) = (panel.rows(), panel.cols());
    let mats = panel
        .iter()
        .zip(f_hat.iter())
        .map(|(x, f)| {
            let common: Vector = gamma_tilde * vectorize(f);
            x - unvectorize(&common, p1, p2)
        })
        .collect();
    Ok(MatrixPanel::from_parts_unchecked(p1, p2, mats))
}

/// Idiosyncratic recovery as the OLS projection residual: the vectorized panel
/// minus its projection onto the fitted factor columns. The result is exactly
/// orthogonal to the factors up to round-off.
pub fn idiosyncratic_projection(panel: &MatrixPanel, f_hat: &MatrixPanel) -> Result<MatrixPanel> {
    let gamma = ols_loading(panel, f_hat)?;
    idiosyncratic_from_gamma(panel, f_hat, &gamma)
}

/// Runs the full estimation pipeline: pre-trained projections, factor
/// projection, OLS loading, block averaging, and idiosyncratic recovery.
pub fn fit_mfm(
    pretrain: &MatrixPanel,
    panel: &MatrixPanel,
    k1: usize,
    k2: usize,
    options: MfmOptions,
) -> Result<MfmFit> {
    if pretrain.rows() != panel.rows() || pretrain.cols() != panel.cols() {
        return Err(FamarError::DimensionMismatch(format!(
            "pretrain panel is {}x{}, estimation panel is {}x{}",
            pretrain.rows(),
            pretrain.cols(),
            panel.rows(),
            panel.cols()
        )));
    }
    let (pretrain_centered, panel_centered, panel_mean) = if options.demean {
        let (pre, _) = pretrain.demeaned();
        let (pan, mean) = panel.demeaned();
        (pre, pan, Some(mean))
    } else {
        (pretrain.clone(), panel.clone(), None)
    };

    let projections = pretrain_projections(&pretrain_centered, k1, k2)?;
    let f_hat = project_factors(&panel_centered, &projections)?;
    let gamma_tilde = ols_loading(&panel_centered, &f_hat)?;
    let avg = block_average(&gamma_tilde, panel.rows(), panel.cols(), k1, k2)?;
    let u_hat = match options.u_mode {
        UMode::Kronecker => {
            check_averaging_scale(avg.c_s, avg.r_s)?;
            let scale = 0.5 * (avg.c_s + avg.r_s);
            idiosyncratic_from_loadings(&panel_centered, &f_hat, &avg.r_hat, &avg.c_hat, scale)?
        }
        UMode::Projection => idiosyncratic_from_gamma(&panel_centered, &f_hat, &gamma_tilde)?,
    };
    Ok(MfmFit {
        projections,
        f_hat,
        gamma_tilde,
        r_hat: avg.r_hat,
        c_hat: avg.c_hat,
        c_s: avg.c_s,
        r_s: avg.r_s,
        u_hat,
        u_hat_mode: options.u_mode,
        panel_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::kron;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn randn_matrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> DenseMatrix {
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
        DenseMatrix::from_column_slice(rows, cols, &data)
    }

    #[test]
    fn block_average_recovers_kronecker_structure() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let r = randn_matrix(&mut rng, 4, 2);
        let c = randn_matrix(&mut rng, 3, 2);
        let gamma = kron(&c, &r);
        let avg = block_average(&gamma, 4, 3, 2, 2).unwrap();
        let mean_c = c.iter().sum::<f64>() / 6.0;
        let mean_r = r.iter().sum::<f64>() / 8.0;
        assert_abs_diff_eq!(avg.r_hat, &r * mean_c, epsilon = 1e-10);
        assert_abs_diff_eq!(avg.c_hat, &c * mean_r, epsilon = 1e-10);
        assert_abs_diff_eq!(avg.c_s, mean_r * mean_c, epsilon = 1e-12);
        assert_abs_diff_eq!(avg.r_s, mean_c * mean_r, epsilon = 1e-12);
    }

    #[test]
    fn block_average_column_vector_example() {
        // R = [1, 2]', C = [3, 4]': the row average is mean(C) R and the
        // column average is mean(R) C.
        let r = DenseMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let c = DenseMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        let gamma = kron(&c, &r);
        let avg = block_average(&gamma, 2, 2, 1, 1).unwrap();
        assert_abs_diff_eq!(
            avg.r_hat,
            DenseMatrix::from_column_slice(2, 1, &[3.5, 7.0]),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            avg.c_hat,
            DenseMatrix::from_column_slice(2, 1, &[4.5, 6.0]),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(avg.r_s, 5.25, epsilon = 1e-12);
        assert_abs_diff_eq!(avg.c_s, 5.25, epsilon = 1e-12);
    }

    #[test]
    fn block_average_against_shuffle_matrix_algebra() {
        // Independent route: the closed-form averaging through explicit
        // block-sum and shuffle matrices.
        use crate::kernels::{block_sum_matrix, shuffle_matrix};
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let (p1, p2, k1, k2) = (3, 4, 2, 2);
        let gamma = randn_matrix(&mut rng, p1 * p2, k1 * k2);
        let avg = block_average(&gamma, p1, p2, k1, k2).unwrap();

        let e_r_left = block_sum_matrix(p1, p2);
        let e_r_right = block_sum_matrix(k1, k2);
        let r_direct = (&e_r_left * &gamma * e_r_right.transpose()) / (p2 * k2) as f64;
        assert_abs_diff_eq!(avg.r_hat, r_direct, epsilon = 1e-12);

        let s_left = shuffle_matrix(p2, p1).to_dense();
        let s_right = shuffle_matrix(k2, k1).to_dense();
        let e_c_left = block_sum_matrix(p2, p1);
        let e_c_right = block_sum_matrix(k2, k1);
        let c_direct = (&e_c_left * &s_left * &gamma * s_right.transpose() * e_c_right.transpose())
            / (p1 * k1) as f64;
        assert_abs_diff_eq!(avg.c_hat, c_direct, epsilon = 1e-12);
    }

    #[test]
    fn block_average_identity_loading() {
        // Gamma = I with k = p: each averaged entry comes from the enumeration
        // of identity blocks.
        let (p1, p2) = (2, 3);
        let gamma = DenseMatrix::identity(p1 * p2, p1 * p2);
        let avg = block_average(&gamma, p1, p2, p1, p2).unwrap();
        // Diagonal blocks of I_{p1 p2} are I_{p1}; off-diagonal blocks are 0.
        let r_expected = DenseMatrix::identity(p1, p1) / p2 as f64;
        assert_abs_diff_eq!(avg.r_hat, r_expected, epsilon = 1e-12);
        let c_expected = DenseMatrix::identity(p2, p2) / p1 as f64;
        assert_abs_diff_eq!(avg.c_hat, c_expected, epsilon = 1e-12);
    }

    #[test]
    fn pretrain_rejects_zero_panel() {
        let panel = MatrixPanel::zeros(5, 4, 3).unwrap();
        assert!(matches!(
            pretrain_projections(&panel, 2, 2),
            Err(FamarError::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn pretrain_rejects_oversized_factor_dimension() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mats = (0..4).map(|_| randn_matrix(&mut rng, 3, 3)).collect();
        let panel = MatrixPanel::new(mats).unwrap();
        assert!(matches!(
            pretrain_projections(&panel, 4, 2),
            Err(FamarError::FactorDimension { .. })
        ));
    }

    #[test]
    fn projection_factors_zero_input() {
        let proj = ProjectionPair::new(
            DenseMatrix::identity(4, 2),
            DenseMatrix::identity(3, 2),
        )
        .unwrap();
        let panel = MatrixPanel::zeros(2, 4, 3).unwrap();
        let f = project_factors(&panel, &proj).unwrap();
        assert_eq!(f[0], DenseMatrix::zeros(2, 2));
    }

    #[test]
    fn projection_recovers_factors_under_scaled_orthogonal_loadings() {
        // W1 = R with R'R = p1 I and W2 = C with C'C = p2 I make H1 = H2 = I.
        let p1 = 4;
        let p2 = 9;
        let r = DenseMatrix::identity(p1, 2) * (p1 as f64).sqrt();
        let c = DenseMatrix::identity(p2, 3) * (p2 as f64).sqrt();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let factors: Vec<DenseMatrix> = (0..6).map(|_| randn_matrix(&mut rng, 2, 3)).collect();
        let xs: Vec<DenseMatrix> = factors.iter().map(|f| &r * f * c.transpose()).collect();
        let panel = MatrixPanel::new(xs).unwrap();
        let proj = ProjectionPair::new(r, c).unwrap();
        let f_hat = project_factors(&panel, &proj).unwrap();
        for (est, truth) in f_hat.iter().zip(&factors) {
            assert_abs_diff_eq!(est, truth, epsilon = 1e-12);
        }
    }

    #[test]
    fn ols_loading_solves_normal_equations() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let n = 40;
        let factors: Vec<DenseMatrix> = (0..n).map(|_| randn_matrix(&mut rng, 2, 2)).collect();
        let xs: Vec<DenseMatrix> = (0..n).map(|_| randn_matrix(&mut rng, 3, 4)).collect();
        let panel = MatrixPanel::new(xs).unwrap();
        let f_panel = MatrixPanel::new(factors).unwrap();
        let gamma = ols_loading(&panel, &f_panel).unwrap();

        // residuals orthogonal to the factor columns
        let mut ortho = DenseMatrix::zeros(12, 4);
        for (x, f) in panel.iter().zip(f_panel.iter()) {
            let fv = vectorize(f);
            let resid = vectorize(x) - &gamma * &fv;
            ortho.ger(1.0, &resid, &fv, 1.0);
        }
        assert!(ortho.amax() < 1e-8);

        // independent route: stacked design solved through its SVD
        let mut design = DenseMatrix::zeros(n, 4);
        let mut target = DenseMatrix::zeros(n, 12);
        for i in 0..n {
            design.row_mut(i).tr_copy_from(&vectorize(&f_panel[i]));
            target.row_mut(i).tr_copy_from(&vectorize(&panel[i]));
        }
        let svd = design.svd(true, true);
        let gamma_t = svd.solve(&target, 1e-12).expect("full-rank design");
        assert_abs_diff_eq!(gamma, gamma_t.transpose(), epsilon = 1e-9);
    }

    #[test]
    fn ols_loading_exact_on_noiseless_model() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let gamma_true = randn_matrix(&mut rng, 6, 4);
        let n = 25;
        let factors: Vec<DenseMatrix> = (0..n).map(|_| randn_matrix(&mut rng, 2, 2)).collect();
        let xs: Vec<DenseMatrix> = factors
            .iter()
            .map(|f| unvectorize(&(&gamma_true * vectorize(f)), 2, 3))
            .collect();
        let gamma = ols_loading(
            &MatrixPanel::new(xs).unwrap(),
            &MatrixPanel::new(factors).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(gamma, gamma_true, epsilon = 1e-10);
    }

    #[test]
    fn ols_loading_needs_enough_samples() {
        let panel = MatrixPanel::zeros(3, 2, 2).unwrap();
        let f_panel = MatrixPanel::zeros(3, 2, 2).unwrap();
        assert!(matches!(
            ols_loading(&panel, &f_panel),
            Err(FamarError::InsufficientSamples(_))
        ));
    }

    #[test]
    fn projection_residual_is_orthogonal_and_fixes_orthogonal_input() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let n = 30;
        let f_panel =
            MatrixPanel::new((0..n).map(|_| randn_matrix(&mut rng, 2, 1)).collect()).unwrap();
        let panel =
            MatrixPanel::new((0..n).map(|_| randn_matrix(&mut rng, 2, 3)).collect()).unwrap();
        let u = idiosyncratic_projection(&panel, &f_panel).unwrap();
        let mut cross = DenseMatrix::zeros(2, 6);
        for (ui, fi) in u.iter().zip(f_panel.iter()) {
            cross.ger(1.0, &vectorize(fi), &vectorize(ui), 1.0);
        }
        assert!(cross.amax() < 1e-8 * panel.max_abs());

        // already-orthogonal panel is a fixed point
        let u2 = idiosyncratic_projection(&u, &f_panel).unwrap();
        assert!(u.frob_distance(&u2) < 1e-8 * u.frob_norm());
    }

    #[test]
    fn projection_residual_matches_per_column_least_squares() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let n = 20;
        let f_panel =
            MatrixPanel::new((0..n).map(|_| randn_matrix(&mut rng, 2, 2)).collect()).unwrap();
        let panel =
            MatrixPanel::new((0..n).map(|_| randn_matrix(&mut rng, 2, 3)).collect()).unwrap();
        let u = idiosyncratic_projection(&panel, &f_panel).unwrap();

        let mut design = DenseMatrix::zeros(n, 4);
        for i in 0..n {
            design.row_mut(i).tr_copy_from(&vectorize(&f_panel[i]));
        }
        let svd = design.clone().svd(true, true);
        for col in 0..6 {
            let target = Vector::from_iterator(n, (0..n).map(|i| vectorize(&panel[i])[col]));
            let coef = svd.solve(&target, 1e-12).expect("full rank");
            let resid = &target - &design * coef;
            for i in 0..n {
                let v = vectorize(&u[i])[col];
                assert_abs_diff_eq!(v, resid[i], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn noiseless_fit_round_trips() {
        // X = R F C' with no idiosyncratic noise: the fitted common component
        // reproduces X and the recovered idiosyncratic panel vanishes.
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let (p1, p2, k1, k2) = (10, 8, 2, 2);
        let r = randn_matrix(&mut rng, p1, k1).map(|v| v + 2.0);
        let c = randn_matrix(&mut rng, p2, k2).map(|v| v + 2.0);
        let make_panel = |rng: &mut ChaCha12Rng, n: usize| {
            let mats: Vec<DenseMatrix> = (0..n)
                .map(|_| &r * randn_matrix(rng, k1, k2) * c.transpose())
                .collect();
            MatrixPanel::new(mats).unwrap()
        };
        let pretrain = make_panel(&mut rng, 60);
        let panel = make_panel(&mut rng, 120);
        let fit = fit_mfm(
            &pretrain,
            &panel,
            k1,
            k2,
            MfmOptions { demean: false, u_mode: UMode::Kronecker },
        )
        .unwrap();
        assert!(fit.u_hat.frob_norm() < 1e-6 * panel.frob_norm());
    }

    #[test]
    fn zero_factors_leave_panel_unchanged_in_kron_mode() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let panel =
            MatrixPanel::new((0..5).map(|_| randn_matrix(&mut rng, 3, 4)).collect()).unwrap();
        let fit = MfmFit {
            projections: ProjectionPair::new(DenseMatrix::identity(3, 2), DenseMatrix::identity(4, 2))
                .unwrap(),
            f_hat: MatrixPanel::zeros(5, 2, 2).unwrap(),
            gamma_tilde: DenseMatrix::zeros(12, 4),
            r_hat: DenseMatrix::from_element(3, 2, 1.0),
            c_hat: DenseMatrix::from_element(4, 2, 1.0),
            c_s: 1.0,
            r_s: 1.0,
            u_hat: MatrixPanel::zeros(5, 3, 4).unwrap(),
            u_hat_mode: UMode::Kronecker,
            panel_mean: None,
        };
        let u = idiosyncratic_kron(&panel, &fit).unwrap();
        assert_eq!(u.frob_distance(&panel), 0.0);
    }

    #[test]
    fn degenerate_scale_is_an_error() {
        let panel = MatrixPanel::zeros(2, 3, 4).unwrap();
        let fit = MfmFit {
            projections: ProjectionPair::new(DenseMatrix::identity(3, 2), DenseMatrix::identity(4, 2))
                .unwrap(),
            f_hat: MatrixPanel::zeros(2, 2, 2).unwrap(),
            gamma_tilde: DenseMatrix::zeros(12, 4),
            r_hat: DenseMatrix::zeros(3, 2),
            c_hat: DenseMatrix::zeros(4, 2),
            c_s: 0.0,
            r_s: 0.0,
            u_hat: MatrixPanel::zeros(2, 3, 4).unwrap(),
            u_hat_mode: UMode::Kronecker,
            panel_mean: None,
        };
        assert!(matches!(
            idiosyncratic_kron(&panel, &fit),
            Err(FamarError::DegenerateScale(_))
        ));
    }

    #[test]
    fn full_rank_projection_mode_annihilates_the_panel() {
        // k1 = p1, k2 = p2 with n > p1 p2: the factor columns span everything.
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let (p1, p2) = (2, 3);
        let n = 40;
        let make = |rng: &mut ChaCha12Rng| -> DenseMatrix {
            randn_matrix(rng, p1, p2).map(|v| v + 1.0)
        };
        let pretrain = MatrixPanel::new((0..30).map(|_| make(&mut rng)).collect()).unwrap();
        let panel = MatrixPanel::new((0..n).map(|_| make(&mut rng)).collect()).unwrap();
        let fit = fit_mfm(
            &pretrain,
            &panel,
            p1,
            p2,
            MfmOptions { demean: false, u_mode: UMode::Projection },
        )
        .unwrap();
        assert!(fit.u_hat.frob_norm() < 1e-8 * panel.frob_norm());
    }

    #[test]
    fn project_factors_is_linear() {
        let mut rng = ChaCha12Rng::seed_from_u64(37);
        let proj = ProjectionPair::new(randn_matrix(&mut rng, 5, 2), randn_matrix(&mut rng, 4, 2))
            .unwrap();
        let xs = MatrixPanel::new((0..3).map(|_| randn_matrix(&mut rng, 5, 4)).collect()).unwrap();
        let ys = MatrixPanel::new((0..3).map(|_| randn_matrix(&mut rng, 5, 4)).collect()).unwrap();
        let (a, b) = (0.7, -1.3);
        let combo = MatrixPanel::new(
            xs.iter()
                .zip(ys.iter())
                .map(|(x, y)| x * a + y * b)
                .collect(),
        )
        .unwrap();
        let fx = project_factors(&xs, &proj).unwrap();
        let fy = project_factors(&ys, &proj).unwrap();
        let fc = project_factors(&combo, &proj).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(fc[i].clone(), &fx[i] * a + &fy[i] * b, epsilon = 1e-12);
        }
    }
}
