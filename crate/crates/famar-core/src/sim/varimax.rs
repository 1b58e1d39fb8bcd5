//! Varimax rotation of loading matrices.

use crate::error::{FamarError, Result};
use crate::panel::DenseMatrix;

/// Varimax criterion: summed column variance of the squared loadings,
/// `sum_j [ mean_i(m_ij^4) - mean_i(m_ij^2)^2 ]`.
pub fn varimax_criterion(m: &DenseMatrix) -> f64 {
    let p = m.nrows() as f64;
    (0..m.ncols())
        .map(|j| {
            let col = m.column(j);
            let s2: f64 = col.iter().map(|v| v * v).sum();
            let s4: f64 = col.iter().map(|v| v.powi(4)).sum();
            s4 / p - (s2 / p).powi(2)
        })
        .sum()
}

/// Normalizes each column to unit l2 norm; zero columns are an error.
fn normalize_columns(loading: &DenseMatrix) -> Result<DenseMatrix> {
    let mut out = loading.clone();
    for j in 0..out.ncols() {
        let norm = out.column(j).norm();
        if norm == 0.0 {
            return Err(FamarError::InvalidConfig(format!(
                "loading column {} is all zero",
                j
            )));
        }
        out.column_mut(j).unscale_mut(norm);
    }
    Ok(out)
}

/// Varimax rotation by pairwise plane rotations (Kaiser's algorithm).
///
/// Columns are first normalized to unit l2 norm; the returned pair is the
/// rotated loading and the orthogonal rotation `T` with `rotated = normalized * T`.
/// Convergence is declared when a full sweep of column pairs moves every
/// rotation angle below `tol`; exceeding `max_iter` sweeps is an error.
pub fn varimax_with_rotation(
    loading: &DenseMatrix,
    max_iter: usize,
    tol: f64,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let mut m = normalize_columns(loading)?;
    let k = m.ncols();
    let mut rotation = DenseMatrix::identity(k, k);
    if k < 2 {
        return Ok((m, rotation));
    }
    let p = m.nrows() as f64;
    for _sweep in 0..max_iter {
        let mut max_angle = 0.0f64;
        for i in 0..k - 1 {
            for j in i + 1..k {
                let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
                for row in 0..m.nrows() {
                    let x = m[(row, i)];
                    let y = m[(row, j)];
                    let u = x * x - y * y;
                    let v = 2.0 * x * y;
                    a += u;
                    b += v;
                    c += u * u - v * v;
                    d += 2.0 * u * v;
                }
                let num = d - 2.0 * a * b / p;
                let den = c - (a * a - b * b) / p;
                let angle = 0.25 * num.atan2(den);
                if angle.abs() <= 1e-15 {
                    continue;
                }
                max_angle = max_angle.max(angle.abs());
                let (sin, cos) = angle.sin_cos();
                for row in 0..m.nrows() {
                    let x = m[(row, i)];
                    let y = m[(row, j)];
                    m[(row, i)] = cos * x + sin * y;
                    m[(row, j)] = -sin * x + cos * y;
                }
                for row in 0..k {
                    let x = rotation[(row, i)];
                    let y = rotation[(row, j)];
                    rotation[(row, i)] = cos * x + sin * y;
                    rotation[(row, j)] = -sin * x + cos * y;
                }
            }
        }
        if max_angle < tol {
            return Ok((m, rotation));
        }
    }
    Err(FamarError::VarimaxNonConvergence { max_iter })
}

/// Column-normalized, varimax-rotated loading matrix.
pub fn varimax(loading: &DenseMatrix, max_iter: usize, tol: f64) -> Result<DenseMatrix> {
    varimax_with_rotation(loading, max_iter, tol).map(|(rotated, _)| rotated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn single_column_returns_normalized_input() {
        let loading = DenseMatrix::from_column_slice(3, 1, &[3.0, 0.0, 4.0]);
        let out = varimax(&loading, 50, 1e-10).unwrap();
        assert_abs_diff_eq!(
            out,
            DenseMatrix::from_column_slice(3, 1, &[0.6, 0.0, 0.8]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn rotation_is_orthogonal_and_improves_criterion() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let loading = DenseMatrix::from_fn(8, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (rotated, t) = varimax_with_rotation(&loading, 200, 1e-10).unwrap();
        let gram = t.transpose() * &t;
        assert!((gram - DenseMatrix::identity(3, 3)).norm() <= 1e-8);
        let normalized = normalize_columns(&loading).unwrap();
        assert!(varimax_criterion(&rotated) >= varimax_criterion(&normalized) - 1e-12);
        assert_abs_diff_eq!(&normalized * &t, rotated, epsilon = 1e-10);
    }

    #[test]
    fn sparse_structure_is_a_fixed_point() {
        // one nonzero per row: already varimax-optimal, rotation stays at
        // identity up to column sign/permutation
        let loading = DenseMatrix::from_row_slice(
            4,
            2,
            &[2.0, 0.0, 1.5, 0.0, 0.0, 1.0, 0.0, 3.0],
        );
        let (rotated, _) = varimax_with_rotation(&loading, 100, 1e-12).unwrap();
        let before = varimax_criterion(&normalize_columns(&loading).unwrap());
        let after = varimax_criterion(&rotated);
        assert_abs_diff_eq!(before, after, epsilon = 1e-10);
    }

    #[test]
    fn two_column_case_matches_angle_grid_search() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let loading = DenseMatrix::from_fn(4, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let normalized = normalize_columns(&loading).unwrap();
        let (rotated, _) = varimax_with_rotation(&loading, 200, 1e-12).unwrap();
        let achieved = varimax_criterion(&rotated);

        // dense grid over the rotation angle
        let mut best = f64::NEG_INFINITY;
        let steps = 20_000;
        for s in 0..steps {
            let angle = std::f64::consts::PI * (s as f64) / steps as f64;
            let (sin, cos) = angle.sin_cos();
            let t = DenseMatrix::from_row_slice(2, 2, &[cos, -sin, sin, cos]);
            best = best.max(varimax_criterion(&(&normalized * t)));
        }
        assert!(
            achieved >= best - 1e-3,
            "pairwise solution {achieved} vs grid {best}"
        );
    }

    #[test]
    fn zero_column_is_rejected() {
        let loading = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        assert!(varimax(&loading, 10, 1e-8).is_err());
    }
}
