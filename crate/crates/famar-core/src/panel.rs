//! Dense matrix aliases and the `MatrixPanel` sample container.

use crate::error::{FamarError, Result};

pub type DenseMatrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;

/// An ordered collection of `n` real matrices sharing a common shape.
///
/// Panels carry covariate samples `X_i`, factor samples `F_i`, or
/// idiosyncratic samples `U_i`. All entries are finite and all members share
/// the same `(rows, cols)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPanel {
    rows: usize,
    cols: usize,
    mats: Vec<DenseMatrix>,
}

impl MatrixPanel {
    /// Builds a panel from matrices, validating shape agreement and finiteness.
    pub fn new(mats: Vec<DenseMatrix>) -> Result<Self> {
        let first = mats.first().ok_or(FamarError::EmptyPanel)?;
        let (rows, cols) = (first.nrows(), first.ncols());
        for (i, m) in mats.iter().enumerate() {
            if m.nrows() != rows || m.ncols() != cols {
                return Err(FamarError::DimensionMismatch(format!(
                    "panel member {} is {}x{}, expected {}x{}",
                    i,
                    m.nrows(),
                    m.ncols(),
                    rows,
                    cols
                )));
            }
            if !m.iter().all(|v| v.is_finite()) {
                return Err(FamarError::NonFinite(format!("panel member {}", i)));
            }
        }
        Ok(Self { rows, cols, mats })
    }

    /// Builds a panel without the finiteness scan. Shapes are still checked.
    pub(crate) fn from_parts_unchecked(rows: usize, cols: usize, mats: Vec<DenseMatrix>) -> Self {
        debug_assert!(mats.iter().all(|m| m.nrows() == rows && m.ncols() == cols));
        Self { rows, cols, mats }
    }

    pub fn zeros(n: usize, rows: usize, cols: usize) -> Result<Self> {
        if n == 0 {
            return Err(FamarError::EmptyPanel);
        }
        Ok(Self {
            rows,
            cols,
            mats: vec![DenseMatrix::zeros(rows, cols); n],
        })
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize) -> &DenseMatrix {
        &self.mats[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DenseMatrix> {
        self.mats.iter()
    }

    pub fn as_slice(&self) -> &[DenseMatrix] {
        &self.mats
    }

    /// Sub-panel of the samples selected by `indices` (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(FamarError::EmptyPanel);
        }
        let mats = indices.iter().map(|&i| self.mats[i].clone()).collect();
        Ok(Self::from_parts_unchecked(self.rows, self.cols, mats))
    }

    /// Sub-panel over a contiguous sample range.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.is_empty() {
            return Err(FamarError::EmptyPanel);
        }
        let mats = self.mats[range].to_vec();
        Ok(Self::from_parts_unchecked(self.rows, self.cols, mats))
    }

    /// Entrywise mean matrix across samples.
    pub fn mean_matrix(&self) -> DenseMatrix {
        let mut acc = DenseMatrix::zeros(self.rows, self.cols);
        for m in &self.mats {
            acc += m;
        }
        acc / self.mats.len() as f64
    }

    /// Subtracts a fixed matrix from every sample.
    pub fn shifted_by(&self, shift: &DenseMatrix) -> Result<Self> {
        if shift.nrows() != self.rows || shift.ncols() != self.cols {
            return Err(FamarError::DimensionMismatch(format!(
                "shift is {}x{}, panel is {}x{}",
                shift.nrows(),
                shift.ncols(),
                self.rows,
                self.cols
            )));
        }
        let mats = self.mats.iter().map(|m| m - shift).collect();
        Ok(Self::from_parts_unchecked(self.rows, self.cols, mats))
    }

    /// Demeans the panel by its own entrywise sample mean, returning the
    /// centered panel and the removed mean.
    pub fn demeaned(&self) -> (Self, DenseMatrix) {
        let mean = self.mean_matrix();
        let centered = self.shifted_by(&mean).expect("shape of own mean matches");
        (centered, mean)
    }

    /// Aggregate Frobenius norm `sqrt(sum_i ||M_i||_F^2)`.
    pub fn frob_norm(&self) -> f64 {
        self.mats
            .iter()
            .map(|m| m.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Aggregate Frobenius distance to another panel of the same shape.
    pub fn frob_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len());
        self.mats
            .iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest absolute entry across the panel.
    pub fn max_abs(&self) -> f64 {
        self.mats
            .iter()
            .map(|m| m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for MatrixPanel {
    type Output = DenseMatrix;
    fn index(&self, i: usize) -> &DenseMatrix {
        &self.mats[i]
    }
}
