//! Factor-augmented matrix regression.
//!
//! The crate provides, in order of dependency:
//!
//! - [`kernels`]: Kronecker/vectorization utilities, shuffle and block-sum
//!   matrices, and the singular-value thresholding operator.
//! - [`mfm`]: matrix factor model estimation by pre-trained projection and
//!   block-wise averaged OLS.
//! - [`solver`]: nuclear-norm and lasso penalized matrix factor regression via
//!   accelerated proximal gradient descent, plus cross-validation.
//! - [`sim`]: synthetic data generation, the Monte-Carlo experiment harness,
//!   rolling-window prediction, and varimax rotation of loadings.

pub mod error;
pub mod kernels;
pub mod mfm;
pub mod panel;
pub mod sim;
pub mod solver;
pub mod stats;

pub use error::{FamarError, Result};
pub use panel::{DenseMatrix, MatrixPanel, Vector};
