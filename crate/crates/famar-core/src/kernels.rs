//! Dense linear-algebra building blocks: Kronecker products, column-stacking
//! vectorization, block-sum and shuffle matrices, and singular-value
//! thresholding.
//!
//! Vectorization is column-stacking throughout, so `vec(A X B) = (B' ⊗ A) vec(X)`
//! holds and the rest of the crate can rely on it.

use crate::error::{FamarError, Result};
use crate::panel::{DenseMatrix, Vector};

/// Kronecker product `a ⊗ b`. Block `(i, j)` of the result equals `a[(i, j)] * b`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DenseMatrix::zeros(ra * rb, ca * cb);
    for ja in 0..ca {
        for ia in 0..ra {
            let scale = a[(ia, ja)];
            for jb in 0..cb {
                for ib in 0..rb {
                    out[(ia * rb + ib, ja * cb + jb)] = scale * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Column-stacking vectorization: column 1 first, so `vectorize(A).len() == rows * cols`.
pub fn vectorize(a: &DenseMatrix) -> Vector {
    // nalgebra stores column-major, so the raw slice already is vec(A).
    Vector::from_column_slice(a.as_slice())
}

/// Inverse of [`vectorize`]: reshapes a column-stacked vector back to `rows x cols`.
pub fn unvectorize(v: &Vector, rows: usize, cols: usize) -> DenseMatrix {
    assert_eq!(v.len(), rows * cols, "vector length must equal rows*cols");
    DenseMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// Block-sum matrix `E_{pq}`: horizontal concatenation of `q` copies of `I_p`,
/// shape `p x pq`.
pub fn block_sum_matrix(p: usize, q: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(p, p * q);
    for block in 0..q {
        for i in 0..p {
            out[(i, block * p + i)] = 1.0;
        }
    }
    out
}

/// A permutation matrix stored as its row map: row `i` of the dense matrix is
/// the unit row `e_{perm[i]}`, so `(S v)[i] = v[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationMatrix {
    perm: Vec<usize>,
}

impl PermutationMatrix {
    pub fn from_row_map(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return Err(FamarError::InvalidConfig(
                    "permutation row map is not a bijection".into(),
                ));
            }
            seen[p] = true;
        }
        Ok(Self { perm })
    }

    pub fn size(&self) -> usize {
        self.perm.len()
    }

    pub fn row_map(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0usize; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        Self { perm: inv }
    }

    /// Applies the permutation to a vector: `(S v)[i] = v[perm[i]]`.
    pub fn apply(&self, v: &Vector) -> Vector {
        assert_eq!(v.len(), self.perm.len());
        Vector::from_iterator(self.perm.len(), self.perm.iter().map(|&p| v[p]))
    }

    /// Row-permutes a matrix: `S M`.
    pub fn apply_rows(&self, m: &DenseMatrix) -> DenseMatrix {
        assert_eq!(m.nrows(), self.perm.len());
        let mut out = DenseMatrix::zeros(m.nrows(), m.ncols());
        for (i, &p) in self.perm.iter().enumerate() {
            out.row_mut(i).copy_from(&m.row(p));
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.perm.len();
        let mut out = DenseMatrix::zeros(n, n);
        for (i, &p) in self.perm.iter().enumerate() {
            out[(i, p)] = 1.0;
        }
        out
    }
}

/// Shuffle matrix `S_{pq}`: the rows of `I_{pq}` reordered as the slices
/// `(1:q:pq), (2:q:pq), ..., (q:q:pq)` stacked vertically (MATLAB colon
/// convention, `q` is the increment). Satisfies `S_{pq} vec(B) = vec(B')` for
/// `B` of shape `q x p`.
pub fn shuffle_matrix(p: usize, q: usize) -> PermutationMatrix {
    let mut perm = Vec::with_capacity(p * q);
    for start in 0..q {
        for step in 0..p {
            perm.push(start + step * q);
        }
    }
    PermutationMatrix::from_row_map(perm).expect("slice construction is a bijection")
}

/// Singular-value thresholding: computes the full SVD of `c` and replaces each
/// singular value `d` by `max(0, d - threshold)`, keeping the singular vectors.
/// This is the proximal operator of `threshold * ||.||_*`.
pub fn svt(c: &DenseMatrix, threshold: f64) -> Result<DenseMatrix> {
    if threshold < 0.0 {
        return Err(FamarError::InvalidConfig(
            "svt threshold must be nonnegative".into(),
        ));
    }
    if !c.iter().all(|v| v.is_finite()) {
        return Err(FamarError::NonFinite("svt input".into()));
    }
    let svd = c.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let thresholded = svd.singular_values.map(|d| (d - threshold).max(0.0));
    let mut scaled = u.clone();
    for (j, d) in thresholded.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*d);
    }
    Ok(scaled * vt)
}

/// Singular values of `m` in descending order.
pub fn singular_values(m: &DenseMatrix) -> Vector {
    m.clone().svd(false, false).singular_values
}

/// Nuclear norm: the sum of singular values.
pub fn nuclear_norm(m: &DenseMatrix) -> f64 {
    singular_values(m).iter().sum()
}

/// Numerical rank at the relative tolerance `1e-8 * sigma_max`.
pub fn effective_rank(m: &DenseMatrix) -> usize {
    rank_at(m, 1e-8)
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order
/// and the eigenvector columns reordered to match.
pub(crate) fn sorted_symmetric_eigen(m: DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let eigen = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eigen.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let values: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i]).collect();
    let mut vectors = DenseMatrix::zeros(eigen.eigenvectors.nrows(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        vectors
            .column_mut(dst)
            .copy_from(&eigen.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Numerical rank: singular values above `rel_tol * sigma_max` count.
pub fn rank_at(m: &DenseMatrix, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if smax <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&d| d > rel_tol * smax).count()
}
