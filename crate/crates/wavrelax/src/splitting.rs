//! Matrix splittings `P Q P^T = M + N` with `M` block diagonal.
//!
//! The permutation is applied eagerly: a `Splitting` stores the reordered
//! system, so inner solver loops work on contiguous blocks and never
//! re-index through `perm`. `mu` and `eta` are the operator norms of `M`
//! and `N`, the Lipschitz constants of the induced fixed-point map.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{operator_norm_dense, operator_norm_sparse, OperatorNorm};
use crate::sparse::{invert_permutation, SparseMatrix};
use crate::system::SparseSystem;

/// Diagonal blocks up to this size are stored densely for fast repeated
/// solves; larger blocks stay sparse.
pub const DENSE_BLOCK_MAX: usize = 64;

/// One diagonal block of `M`.
#[derive(Debug, Clone)]
pub enum MBlock {
    Dense(DMatrix<f64>),
    Sparse(SparseMatrix),
}

impl MBlock {
    pub fn dim(&self) -> usize {
        match self {
            MBlock::Dense(a) => a.nrows(),
            MBlock::Sparse(a) => a.nrows(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            MBlock::Dense(a) => a.clone(),
            MBlock::Sparse(a) => a.to_dense(),
        }
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        match self {
            MBlock::Dense(a) => {
                for i in 0..a.nrows() {
                    let mut acc = 0.0;
                    for j in 0..a.ncols() {
                        acc += a[(i, j)] * v[j];
                    }
                    out[i] = acc;
                }
            }
            MBlock::Sparse(a) => a.mat_vec_into(v, out),
        }
    }
}

/// Block splitting of a (permuted) system matrix.
#[derive(Debug, Clone)]
pub struct Splitting {
    pub n: usize,
    /// `perm[new] = old`: row `a` of the permuted system is variable
    /// `perm[a]` of the original one.
    pub perm: Vec<usize>,
    pub block_sizes: Vec<usize>,
    /// Starting row of each block in the permuted ordering.
    pub block_offsets: Vec<usize>,
    /// Diagonal blocks of `M`.
    pub m_blocks: Vec<MBlock>,
    /// Off-block coupling matrix `N` (zero inside the diagonal blocks).
    pub n_mat: SparseMatrix,
    /// Operator norm of `M`.
    pub mu: f64,
    /// Operator norm of `N`.
    pub eta: f64,
    pub norm: OperatorNorm,
}

impl Splitting {
    pub fn block_count(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn largest_block(&self) -> usize {
        self.block_sizes.iter().copied().max().unwrap_or(0)
    }

    /// Map a vector into the permuted ordering.
    pub fn permute_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n, |a, _| x[self.perm[a]])
    }

    /// Map a permuted vector back to the original ordering.
    pub fn unpermute_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    /// `out = M v` in the permuted ordering.
    pub fn m_apply_into(&self, v: &[f64], out: &mut [f64]) {
        for (block, &off) in self.m_blocks.iter().zip(&self.block_offsets) {
            let d = block.dim();
            block.apply_into(&v[off..off + d], &mut out[off..off + d]);
        }
    }

    /// `(M + N) v`, the permuted system matrix applied to `v`.
    pub fn q_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = vec![0.0; self.n];
        self.m_apply_into(v.as_slice(), &mut out);
        let mut coupling = vec![0.0; self.n];
        self.n_mat.mat_vec_into(v.as_slice(), &mut coupling);
        for (o, c) in out.iter_mut().zip(&coupling) {
            *o += c;
        }
        DVector::from_vec(out)
    }

    /// Reassemble `M + N` densely (test and analysis helper).
    pub fn m_plus_n_dense(&self) -> DMatrix<f64> {
        let mut a = self.n_mat.to_dense();
        for (block, &off) in self.m_blocks.iter().zip(&self.block_offsets) {
            let d = block.dim();
            let dense = block.to_dense();
            for i in 0..d {
                for j in 0..d {
                    a[(off + i, off + j)] += dense[(i, j)];
                }
            }
        }
        a
    }
}

/// Split a system along a permutation and block layout.
pub fn apply_splitting(
    sys: &SparseSystem,
    perm: &[usize],
    block_sizes: &[usize],
    norm: OperatorNorm,
) -> Result<Splitting> {
    let n = sys.n;
    let inv = invert_permutation(perm, n)?;
    if block_sizes.is_empty() || block_sizes.iter().any(|&b| b == 0) {
        return Err(Error::InvalidBlockSizes("blocks must be nonempty".into()));
    }
    let total: usize = block_sizes.iter().sum();
    if total != n {
        return Err(Error::InvalidBlockSizes(format!(
            "block sizes sum to {total}, expected {n}"
        )));
    }

    let mut block_offsets = Vec::with_capacity(block_sizes.len());
    let mut off = 0;
    for &b in block_sizes {
        block_offsets.push(off);
        off += b;
    }
    // block id of each permuted row
    let mut block_of = vec![0usize; n];
    for (id, (&o, &b)) in block_offsets.iter().zip(block_sizes).enumerate() {
        for row in o..o + b {
            block_of[row] = id;
        }
    }

    let mut m_triplets: Vec<Vec<(usize, usize, f64)>> =
        block_sizes.iter().map(|_| Vec::new()).collect();
    let mut n_triplets = Vec::new();
    for (i, j, v) in sys.q.triplets() {
        let (a, b) = (inv[i], inv[j]);
        if block_of[a] == block_of[b] {
            let id = block_of[a];
            let o = block_offsets[id];
            m_triplets[id].push((a - o, b - o, v));
        } else {
            n_triplets.push((a, b, v));
        }
    }

    let mut m_blocks = Vec::with_capacity(block_sizes.len());
    for (id, &size) in block_sizes.iter().enumerate() {
        let sp = SparseMatrix::from_triplets(size, size, &m_triplets[id])?;
        if size <= DENSE_BLOCK_MAX {
            m_blocks.push(MBlock::Dense(sp.to_dense()));
        } else {
            m_blocks.push(MBlock::Sparse(sp));
        }
    }
    let n_mat = SparseMatrix::from_triplets(n, n, &n_triplets)?;

    // Block-diagonal structure: both norms reduce to the max over blocks.
    let mut mu = 0.0f64;
    for block in &m_blocks {
        let norm_b = match block {
            MBlock::Dense(a) => operator_norm_dense(a, norm)?,
            MBlock::Sparse(a) => operator_norm_sparse(a, norm)?,
        };
        mu = mu.max(norm_b);
    }
    let eta = operator_norm_sparse(&n_mat, norm)?;

    Ok(Splitting {
        n,
        perm: perm.to_vec(),
        block_sizes: block_sizes.to_vec(),
        block_offsets,
        m_blocks,
        n_mat,
        mu,
        eta,
        norm,
    })
}

/// The trivial single-block splitting (no permutation, `N = 0`).
pub fn whole_system_splitting(sys: &SparseSystem, norm: OperatorNorm) -> Result<Splitting> {
    let perm: Vec<usize> = (0..sys.n).collect();
    apply_splitting(sys, &perm, &[sys.n], norm)
}

/// The Picard splitting `M = 0`, `N = Q` (every state its own block).
pub fn picard_splitting(sys: &SparseSystem, norm: OperatorNorm) -> Result<Splitting> {
    let n = sys.n;
    let perm: Vec<usize> = (0..n).collect();
    let block_sizes = vec![1usize; n];
    let mut split = apply_splitting(sys, &perm, &block_sizes, norm)?;
    // push the diagonal into N as well
    let mut n_triplets = split.n_mat.triplets();
    for (id, block) in split.m_blocks.iter().enumerate() {
        let v = block.to_dense()[(0, 0)];
        if v != 0.0 {
            n_triplets.push((id, id, v));
        }
    }
    split.n_mat = SparseMatrix::from_triplets(n, n, &n_triplets)?;
    split.m_blocks = (0..n).map(|_| MBlock::Dense(DMatrix::zeros(1, 1))).collect();
    split.mu = 0.0;
    split.eta = operator_norm_sparse(&split.n_mat, norm)?;
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inf_norm_dense;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn system_from_dense(a: &DMatrix<f64>) -> SparseSystem {
        let n = a.nrows();
        SparseSystem::new(
            SparseMatrix::from_dense(a),
            DVector::from_element(n, 1.0),
            1.0,
            "test",
        )
        .unwrap()
    }

    #[test]
    fn block_diagonal_input_gives_zero_coupling() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                -1.0, 2.0, 0.0, 0.0, //
                3.0, -4.0, 0.0, 0.0, //
                0.0, 0.0, -5.0, 1.0, //
                0.0, 0.0, 2.0, -2.0,
            ],
        );
        let sys = system_from_dense(&a);
        let split = apply_splitting(&sys, &[0, 1, 2, 3], &[2, 2], OperatorNorm::InfNorm).unwrap();
        assert_eq!(split.n_mat.nnz(), 0);
        assert_eq!(split.eta, 0.0);
    }

    #[test]
    fn two_state_exchange_example() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let sys = system_from_dense(&a);
        let split = apply_splitting(&sys, &[0, 1], &[1, 1], OperatorNorm::InfNorm).unwrap();
        assert_eq!(split.m_blocks[0].to_dense()[(0, 0)], -1.0);
        assert_eq!(split.m_blocks[1].to_dense()[(0, 0)], -1.0);
        assert_eq!(split.n_mat.get(0, 1), 1.0);
        assert_eq!(split.n_mat.get(1, 0), 1.0);
        assert_eq!(split.mu, 1.0);
        assert_eq!(split.eta, 1.0);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let sys = system_from_dense(&a);
        assert!(apply_splitting(&sys, &[0, 0], &[1, 1], OperatorNorm::InfNorm).is_err());
        assert!(apply_splitting(&sys, &[0, 1], &[1, 2], OperatorNorm::InfNorm).is_err());
        assert!(apply_splitting(&sys, &[0, 1], &[2], OperatorNorm::InfNorm).is_ok());
    }

    #[test]
    fn picard_splitting_moves_everything_into_n() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.5, -1.0]);
        let sys = system_from_dense(&a);
        let split = picard_splitting(&sys, OperatorNorm::InfNorm).unwrap();
        assert_eq!(split.mu, 0.0);
        assert_eq!(split.eta, 1.5);
        assert_eq!(split.m_plus_n_dense(), a);
    }

    proptest! {
        // P Q P^T = M + N must hold entrywise for any valid layout.
        #[test]
        fn reconstruction_is_exact(seed in 0u64..200, p in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2..12usize);
            let p = p.min(n);
            let a = DMatrix::from_fn(n, n, |_, _| {
                if rng.random::<f64>() < 0.4 { rng.random_range(-2.0..2.0) } else { 0.0 }
            });
            let sys = system_from_dense(&a);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let base = n / p;
            let mut sizes = vec![base; p];
            for extra in 0..(n - base * p) {
                sizes[extra] += 1;
            }
            let split = apply_splitting(&sys, &perm, &sizes, OperatorNorm::InfNorm).unwrap();

            let permuted = DMatrix::from_fn(n, n, |i, j| a[(perm[i], perm[j])]);
            let diff = inf_norm_dense(&(&permuted - split.m_plus_n_dense()));
            prop_assert!(diff == 0.0, "reconstruction differs by {diff}");
            // eta = 0 iff N holds no nonzero entries
            prop_assert_eq!(split.eta == 0.0, split.n_mat.nnz() == 0);
        }
    }
}
