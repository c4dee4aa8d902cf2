//! Compressed sparse row matrices.
//!
//! Storage never keeps explicit zeros: constructors drop entries whose
//! value is exactly `0.0`, so structural and numerical nonzero patterns
//! coincide.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Real sparse matrix in compressed row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from coordinate triplets. Duplicate `(row, col)` pairs are
    /// rejected rather than summed; exact zeros are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidInput(format!(
                    "triplet ({i}, {j}) out of bounds for a {nrows}x{ncols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("sparse matrix triplet"));
            }
            entries.push((i, j, v));
        }
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::InvalidInput(format!(
                    "duplicate triplet at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        entries.retain(|&(_, _, v)| v != 0.0);

        let mut row_ptr = vec![0usize; nrows + 1];
        for &(i, _, _) in &entries {
            row_ptr[i + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = entries.iter().map(|&(_, j, _)| j).collect();
        let values = entries.iter().map(|&(_, _, v)| v).collect();
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &triplets).expect("identity triplets are valid")
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut triplets = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    triplets.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &triplets)
            .expect("dense entries are in bounds and unique")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Entries in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out.push((i, j, v));
            }
        }
        out
    }

    /// Exact sparse matrix-vector product.
    pub fn mat_vec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                context: "mat_vec",
                expected: self.ncols,
                found: v.len(),
            });
        }
        let mut out = DVector::zeros(self.nrows);
        self.mat_vec_into(v.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// Unchecked product into a caller-provided buffer (hot path).
    pub fn mat_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &a) in cols.iter().zip(vals) {
                acc += a * v[j];
            }
            out[i] = acc;
        }
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                a[(i, j)] = v;
            }
        }
        a
    }

    pub fn transpose(&self) -> Self {
        let triplets: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(i, j, v)| (j, i, v))
            .collect();
        Self::from_triplets(self.ncols, self.nrows, &triplets)
            .expect("transposed entries stay unique")
    }

    /// Symmetric permutation `B[a][b] = A[perm[a]][perm[b]]` for a square
    /// matrix, i.e. `B = P A P^T` with `perm[new] = old`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Result<Self> {
        if self.nrows != self.ncols {
            return Err(Error::InvalidInput(
                "symmetric permutation needs a square matrix".into(),
            ));
        }
        let inv = invert_permutation(perm, self.nrows)?;
        let triplets: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(i, j, v)| (inv[i], inv[j], v))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, &triplets)
    }

    /// Per-column sums (useful for rate-matrix checks).
    pub fn col_sums(&self) -> DVector<f64> {
        let mut sums = DVector::zeros(self.ncols);
        for (_, j, v) in self.triplets() {
            sums[j] += v;
        }
        sums
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= factor;
        }
        out.values.retain(|v| *v != 0.0);
        if factor == 0.0 {
            return Self::zeros(self.nrows, self.ncols);
        }
        out
    }
}

/// Validate `perm` as a permutation of `0..n` and return its inverse.
pub fn invert_permutation(perm: &[usize], n: usize) -> Result<Vec<usize>> {
    if perm.len() != n {
        return Err(Error::InvalidPermutation(format!(
            "length {} does not match dimension {n}",
            perm.len()
        )));
    }
    let mut inv = vec![usize::MAX; n];
    for (new, &old) in perm.iter().enumerate() {
        if old >= n {
            return Err(Error::InvalidPermutation(format!(
                "index {old} out of range"
            )));
        }
        if inv[old] != usize::MAX {
            return Err(Error::InvalidPermutation(format!(
                "index {old} appears twice"
            )));
        }
        inv[old] = new;
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mat_vec_identity() {
        let eye = SparseMatrix::identity(3);
        let v = DVector::from_vec(vec![1.0, -2.0, 3.5]);
        assert_eq!(eye.mat_vec(&v).unwrap(), v);
    }

    #[test]
    fn mat_vec_zero_matrix() {
        let z = SparseMatrix::zeros(3, 3);
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(z.mat_vec(&v).unwrap(), DVector::zeros(3));
    }

    #[test]
    fn mat_vec_hand_example() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, -1.0), (0, 1, 1.0), (1, 1, -2.0)])
            .unwrap();
        let v = DVector::from_vec(vec![1.0, 1.0]);
        let out = a.mat_vec(&v).unwrap();
        assert_eq!(out.as_slice(), &[0.0, -2.0]);
    }

    #[test]
    fn mat_vec_dimension_mismatch() {
        let a = SparseMatrix::identity(2);
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            a.mat_vec(&v),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_triplets_rejected() {
        let r = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0)]);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
        // duplicates of an explicit zero are still duplicates
        let r = SparseMatrix::from_triplets(2, 2, &[(1, 0, 0.0), (1, 0, 0.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn explicit_zeros_dropped() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 0.0), (1, 1, 2.0)]).unwrap();
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.get(0, 0), 0.0);
        assert_eq!(a.get(1, 1), 2.0);
    }

    #[test]
    fn inf_norm_is_max_abs_row_sum() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, -1.0), (0, 1, 1.0), (1, 1, -2.0)])
            .unwrap();
        assert_eq!(a.inf_norm(), 2.0);
    }

    #[test]
    fn permute_symmetric_round_trip() {
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 1, 1.0), (1, 2, 2.0), (2, 0, 3.0), (1, 1, -1.0)],
        )
        .unwrap();
        let perm = vec![2, 0, 1];
        let b = a.permute_symmetric(&perm).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(b.get(i, j), a.get(perm[i], perm[j]));
            }
        }
    }

    #[test]
    fn transpose_flips_entries() {
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 2, 5.0), (1, 0, -1.0)]).unwrap();
        let t = a.transpose();
        assert_eq!(t.nrows(), 3);
        assert_eq!(t.get(2, 0), 5.0);
        assert_eq!(t.get(0, 1), -1.0);
    }
}
