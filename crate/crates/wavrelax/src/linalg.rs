//! Dense kernels shared across the solver: operator norms and LU solves
//! with reusable factorizations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Dimension up to which two-norms are computed by dense SVD; above it a
/// power iteration on `A^T A` is used (relative tolerance 1e-12, capped at
/// 10000 sweeps).
pub const DENSE_SVD_MAX: usize = 2000;

 /// Matrix norm used for Lipschitz constants and convergence measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OperatorNorm {
    TwoNorm,
    #[default]
    InfNorm,
}

impl std::str::FromStr for OperatorNorm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two" | "two_norm" | "2" => Ok(Self::TwoNorm),
            "inf" | "inf_norm" => Ok(Self::InfNorm),
            other => Err(Error::InvalidInput(format!("unknown norm '{other}'"))),
        }
    }
}

/// Operator norm of a dense matrix: exact max absolute row sum, or the
/// largest singular value.
pub fn operator_norm_dense(a: &DMatrix<f64>, which: OperatorNorm) -> Result<f64> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("operator_norm input"));
    }
    Ok(match which {
        OperatorNorm::InfNorm => inf_norm_dense(a),
        OperatorNorm::TwoNorm => two_norm_dense(a),
    })
}

pub fn operator_norm_sparse(a: &SparseMatrix, which: OperatorNorm) -> Result<f64> {
    match which {
        OperatorNorm::InfNorm => Ok(a.inf_norm()),
        OperatorNorm::TwoNorm => {
            if a.nrows().max(a.ncols()) <= DENSE_SVD_MAX {
                Ok(two_norm_dense(&a.to_dense()))
            } else {
                Ok(two_norm_power(a))
            }
        }
    }
}

pub fn inf_norm_dense(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum())
        .fold(0.0, f64::max)
}

fn two_norm_dense(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Power iteration on `A^T A` for matrices past the dense-SVD cutoff.
fn two_norm_power(a: &SparseMatrix) -> f64 {
    let at = a.transpose();
    let mut v = DVector::from_element(a.ncols(), 1.0 / (a.ncols() as f64).sqrt());
    let mut tmp = vec![0.0; a.nrows()];
    let mut w = vec![0.0; a.ncols()];
    let mut lambda = 0.0f64;
    for _ in 0..10_000 {
        a.mat_vec_into(v.as_slice(), &mut tmp);
        at.mat_vec_into(&tmp, &mut w);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if (next - lambda).abs() <= 1e-12 * next.max(1.0) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.sqrt()
}

/// LU factorization with partial pivoting, reusable across repeated solves
/// with the same matrix.
#[derive(Debug)]
pub struct LuFactor {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    dim: usize,
}

impl LuFactor {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                context: "lu factorization",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lu factorization input"));
        }
        let dim = a.nrows();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lu = a.lu();
        let diag = lu.u().diagonal();
        let threshold = f64::EPSILON * (dim as f64).max(1.0) * scale;
        for (i, d) in diag.iter().enumerate() {
            if d.abs() <= threshold {
                return Err(Error::SingularMatrix { pivot: i });
            }
        }
        Ok(Self { lu, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "lu solve",
                expected: self.dim,
                found: b.len(),
            });
        }
        self.lu
            .solve(b)
            .ok_or(Error::SingularMatrix { pivot: self.dim })
    }

    /// In-place solve for a right-hand side stored in a mutable slice.
    pub fn solve_slice(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.dim);
        let mut v = DVector::from_column_slice(b);
        self.lu.solve_mut(&mut v);
        b.copy_from_slice(v.as_slice());
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "lu solve",
                expected: self.dim,
                found: b.nrows(),
            });
        }
        self.lu
            .solve(b)
            .ok_or(Error::SingularMatrix { pivot: self.dim })
    }
}

/// One-shot dense solve `A X = B`; factor once with [`LuFactor`] when the
/// same `A` is reused.
pub fn lu_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    LuFactor::new(a.clone())?.solve_matrix(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inf_norm_hand_example() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
        assert_eq!(operator_norm_dense(&a, OperatorNorm::InfNorm).unwrap(), 2.0);
    }

    #[test]
    fn two_norm_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -4.0]);
        let n = operator_norm_dense(&a, OperatorNorm::TwoNorm).unwrap();
        assert!((n - 4.0).abs() < 1e-10);
    }

    #[test]
    fn two_norm_nilpotent() {
        // singular values {1, 0}
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let n = operator_norm_dense(&a, OperatorNorm::TwoNorm).unwrap();
        assert!((n - 1.0).abs() < 1e-10);
    }

    #[test]
    fn power_iteration_matches_dense_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut triplets = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                if rng.random::<f64>() < 0.2 {
                    triplets.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let a = SparseMatrix::from_triplets(40, 40, &triplets).unwrap();
        let dense = two_norm_dense(&a.to_dense());
        let power = two_norm_power(&a);
        assert!((dense - power).abs() <= 1e-8 * dense.max(1.0));
    }

    #[test]
    fn lu_identity() {
        let eye = DMatrix::<f64>::identity(3, 3);
        let b = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let x = lu_solve(&eye, &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn lu_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 1, &[2.0, 8.0]);
        let x = lu_solve(&a, &b).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn lu_residual_bound_on_random_system() {
        // the residual check is the oracle
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let a = DMatrix::from_fn(5, 5, |i, j| {
            if i == j {
                5.0 + rng.random::<f64>()
            } else {
                rng.random_range(-1.0..1.0)
            }
        });
        let b = DMatrix::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0));
        let x = lu_solve(&a, &b).unwrap();
        let resid = inf_norm_dense(&(&a * &x - &b));
        let bound = 1e-10 * (inf_norm_dense(&a) * inf_norm_dense(&x) + inf_norm_dense(&b));
        assert!(resid <= bound, "residual {resid} exceeds {bound}");
    }

    #[test]
    fn lu_singular_names_pivot() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        match LuFactor::new(a) {
            Err(Error::SingularMatrix { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn lu_mat_vec_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a = DMatrix::from_fn(6, 6, |i, j| {
                if i == j {
                    4.0 + rng.random::<f64>()
                } else {
                    rng.random_range(-1.0..1.0)
                }
            });
            let v = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
            let sp = SparseMatrix::from_dense(&a);
            let av = sp.mat_vec(&v).unwrap();
            let back = LuFactor::new(a).unwrap().solve_vec(&av).unwrap();
            let err = (&back - &v).amax();
            assert!(err <= 1e-8 * v.amax().max(1.0));
        }
    }
}
