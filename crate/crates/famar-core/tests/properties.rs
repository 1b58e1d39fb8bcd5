//! Property tests for the algebraic invariants of the kernel and estimator
//! layers.

use famar_core::kernels::{block_sum_matrix, kron, shuffle_matrix, svt, vectorize};
use famar_core::mfm::{fit_mfm, MfmOptions, UMode};
use famar_core::sim::{generate, SimConfig};
use famar_core::{DenseMatrix, MatrixPanel};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = usize> {
    1usize..5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kron_mixed_product(
        (m, n, p, q, r, s) in (dims(), dims(), dims(), dims(), dims(), dims()),
        data in proptest::collection::vec(-5.0f64..5.0, 101),
    ) {
        let mut cursor = 0usize;
        let mut next = |rows: usize, cols: usize| {
            let m = DenseMatrix::from_fn(rows, cols, |i, j| {
                data[(cursor + i * cols + j) % data.len()]
            });
            cursor += rows * cols;
            m
        };
        let a = next(m, n);
        let b = next(p, q);
        let c = next(n, r);
        let d = next(q, s);
        let lhs = kron(&a, &b) * kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        prop_assert!((lhs - rhs).amax() < 1e-10);
    }

    #[test]
    fn vec_of_product_is_kron_times_vec(
        (m, n, p) in (dims(), dims(), dims()),
        a_data in proptest::collection::vec(-3.0f64..3.0, 16),
        x_data in proptest::collection::vec(-3.0f64..3.0, 16),
        b_data in proptest::collection::vec(-3.0f64..3.0, 16),
    ) {
        let a = DenseMatrix::from_fn(m, n, |i, j| a_data[(i * n + j) % a_data.len()]);
        let x = DenseMatrix::from_fn(n, p, |i, j| x_data[(i * p + j) % x_data.len()]);
        let b = DenseMatrix::from_fn(p, m, |i, j| b_data[(i * m + j) % b_data.len()]);
        let lhs = vectorize(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vectorize(&x);
        prop_assert!((lhs - rhs).amax() < 1e-10);
    }

    #[test]
    fn shuffle_matrices_are_orthogonal((p, q) in (1usize..7, 1usize..7)) {
        let s = shuffle_matrix(p, q).to_dense();
        let gram = &s * s.transpose();
        prop_assert!((gram - DenseMatrix::identity(p * q, p * q)).amax() < 1e-12);
    }

    #[test]
    fn block_sum_times_transpose_is_scaled_identity((p, q) in (1usize..7, 1usize..7)) {
        let e = block_sum_matrix(p, q);
        let gram = &e * e.transpose();
        prop_assert!((gram - DenseMatrix::identity(p, p) * q as f64).amax() < 1e-12);
    }

    #[test]
    fn svt_is_firmly_nonexpansive(
        a_data in proptest::collection::vec(-4.0f64..4.0, 12),
        b_data in proptest::collection::vec(-4.0f64..4.0, 12),
        threshold in 0.0f64..3.0,
    ) {
        let a = DenseMatrix::from_column_slice(4, 3, &a_data);
        let b = DenseMatrix::from_column_slice(4, 3, &b_data);
        let ta = svt(&a, threshold).unwrap();
        let tb = svt(&b, threshold).unwrap();
        prop_assert!((ta - tb).norm() <= (a - b).norm() + 1e-10);
    }
}

/// Scale equivariance: scaling every covariate by `s` scales the factor
/// estimates by `s`, leaves the loadings unchanged, and scales the
/// reconstructed common component by exactly `s`.
#[test]
fn mfm_is_scale_equivariant() {
    let config = SimConfig {
        n: 60,
        n_pretrain: 40,
        n_new: 0,
        p1: 8,
        p2: 6,
        seed: 77,
        replications: 1,
        ..SimConfig::experiment_base()
    };
    let data = generate(&config, 0).unwrap();
    let scale = -2.5f64;
    let scaled_pre =
        MatrixPanel::new(data.pretrain.iter().map(|m| m * scale).collect()).unwrap();
    let scaled_panel =
        MatrixPanel::new(data.panel.iter().map(|m| m * scale).collect()).unwrap();

    let opts = MfmOptions { demean: false, u_mode: UMode::Kronecker };
    let base = fit_mfm(&data.pretrain, &data.panel, 2, 2, opts).unwrap();
    let scaled = fit_mfm(&scaled_pre, &scaled_panel, 2, 2, opts).unwrap();

    // the projections come from eigenvectors of a quadratic form: unchanged
    assert!((&scaled.projections.w1 - &base.projections.w1).amax() < 1e-9);
    // gamma and the averaged loadings regress scaled X on scaled factors
    assert!((&scaled.gamma_tilde - &base.gamma_tilde).amax() < 1e-9);
    assert!((scaled.c_s - base.c_s).abs() < 1e-9);

    for i in 0..data.panel.len() {
        let common_base = base.common_component(&base.f_hat[i]);
        let common_scaled = scaled.common_component(&scaled.f_hat[i]);
        assert!(
            (common_scaled - common_base * scale).amax() < 1e-8,
            "common component does not scale exactly at sample {i}"
        );
        assert!((&scaled.f_hat[i] - &base.f_hat[i] * scale).amax() < 1e-9);
    }
}

/// The diversified-projection diagnostic: at the normality-experiment
/// dimensions the smallest singular values of the oracle rotations stay
/// bounded away from zero across seeds.
#[test]
fn diversified_projection_diagnostic_over_seeds() {
    use famar_core::mfm::pretrain_projections;
    use famar_core::sim::OracleRotation;
    let mut failures = 0;
    let seeds = 100u64;
    for seed in 0..seeds {
        let config = SimConfig {
            n: 1,
            n_pretrain: 500,
            p1: 20,
            p2: 30,
            k1: 3,
            k2: 2,
            seed,
            replications: 1,
            ..SimConfig::experiment_base()
        };
        let data = generate(&config, 0).unwrap();
        let proj = pretrain_projections(&data.pretrain, 3, 2).unwrap();
        let oracle =
            OracleRotation::from_truth(&proj, &data.truth.r_star, &data.truth.c_star).unwrap();
        let (nu1, nu2) = oracle.min_singular_values();
        if nu1 <= 0.1 || nu2 <= 0.1 {
            failures += 1;
        }
    }
    assert!(
        failures == 0,
        "nu_min fell below the 0.1 floor in {failures}/{seeds} seeds"
    );
}
