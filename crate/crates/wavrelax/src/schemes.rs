//! Integration schemes and the single-window waveform relaxation loop.
//!
//! All three schemes fit the one-step recurrence
//! `x^{k+1}_{m+1} = C1 x^{k+1}_m + C2 x^k_m + C3 x^k_{m+1}`
//! where the coefficient matrices depend on the splitting and the step
//! size. Implicit operators are kept as per-block LU factorizations; the
//! dense `C` matrices are materialized only on demand (analysis).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::BlockExecutor;
use crate::linalg::LuFactor;
use crate::sparse::SparseMatrix;
use crate::splitting::{MBlock, Splitting};
use crate::system::{SparseSystem, Tolerances, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitEuler,
    ImplicitEuler,
    Trapezoidal,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Scheme::ExplicitEuler => "explicit_euler",
            Scheme::ImplicitEuler => "implicit_euler",
            Scheme::Trapezoidal => "trapezoidal",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" | "explicit_euler" => Ok(Scheme::ExplicitEuler),
            "implicit" | "implicit_euler" => Ok(Scheme::ImplicitEuler),
            "trapezoidal" | "trap" => Ok(Scheme::Trapezoidal),
            other => Err(Error::InvalidInput(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Scheme coefficients bound to one splitting and step size. Implicit
/// inverses are held as block factorizations and reused across steps,
/// iterations, and windows.
#[derive(Debug)]
pub struct SchemeCoefficients {
    pub scheme: Scheme,
    pub h: f64,
    /// LU of `I - h M_bb` (implicit Euler) or `I - h/2 M_bb`
    /// (trapezoidal), one per block; empty for explicit Euler.
    block_factors: Vec<LuFactor>,
}

/// Outcome of one waveform relaxation window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WRReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub residuals: Vec<f64>,
}

/// Build the coefficient operators for `scheme` at step size `h`.
pub fn build_coefficients(split: &Splitting, scheme: Scheme, h: f64) -> Result<SchemeCoefficients> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(format!("step size must be positive, got {h}")));
    }
    let shift = match scheme {
        Scheme::ExplicitEuler => None,
        Scheme::ImplicitEuler => Some(h),
        Scheme::Trapezoidal => Some(h / 2.0),
    };
    let mut block_factors = Vec::new();
    if let Some(a) = shift {
        for (b, block) in split.m_blocks.iter().enumerate() {
            let d = block.dim();
            let mut m = -a * block.to_dense();
            for i in 0..d {
                m[(i, i)] += 1.0;
            }
            let factor = LuFactor::new(m).map_err(|e| match e {
                Error::SingularMatrix { .. } => Error::SingularBlock { block: b },
                other => other,
            })?;
            block_factors.push(factor);
        }
    }
    Ok(SchemeCoefficients {
        scheme,
        h,
        block_factors,
    })
}

impl SchemeCoefficients {
    /// Apply the per-block implicit inverse to every block row of `x`.
    fn solve_blockwise(&self, split: &Splitting, x: &mut DMatrix<f64>) {
        for (b, &off) in split.block_offsets.iter().enumerate() {
            let d = split.block_sizes[b];
            let sub = x.rows(off, d).into_owned();
            let solved = self.block_factors[b]
                .solve_matrix(&sub)
                .expect("factorized block stays nonsingular");
            x.rows_mut(off, d).copy_from(&solved);
        }
    }

    fn m_dense(&self, split: &Splitting) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(split.n, split.n);
        for (block, &off) in split.m_blocks.iter().zip(&split.block_offsets) {
            let d = block.dim();
            m.view_mut((off, off), (d, d)).copy_from(&block.to_dense());
        }
        m
    }

    /// Materialize `C1`.
    pub fn c1_dense(&self, split: &Splitting) -> DMatrix<f64> {
        let n = split.n;
        let eye = DMatrix::<f64>::identity(n, n);
        match self.scheme {
            Scheme::ExplicitEuler => eye + self.h * self.m_dense(split),
            Scheme::ImplicitEuler => {
                let mut inv = eye;
                self.solve_blockwise(split, &mut inv);
                inv
            }
            Scheme::Trapezoidal => {
                let mut c1 = eye + (self.h / 2.0) * self.m_dense(split);
                self.solve_blockwise(split, &mut c1);
                c1
            }
        }
    }

    /// Materialize `C2`.
    pub fn c2_dense(&self, split: &Splitting) -> DMatrix<f64> {
        let n = split.n;
        match self.scheme {
            Scheme::ExplicitEuler => self.h * split.n_mat.to_dense(),
            Scheme::ImplicitEuler => DMatrix::zeros(n, n),
            Scheme::Trapezoidal => {
                let mut c2 = (self.h / 2.0) * split.n_mat.to_dense();
                self.solve_blockwise(split, &mut c2);
                c2
            }
        }
    }

    /// Materialize `C3`.
    pub fn c3_dense(&self, split: &Splitting) -> DMatrix<f64> {
        let n = split.n;
        match self.scheme {
            Scheme::ExplicitEuler => DMatrix::zeros(n, n),
            Scheme::ImplicitEuler => {
                let mut c3 = self.h * split.n_mat.to_dense();
                self.solve_blockwise(split, &mut c3);
                c3
            }
            Scheme::Trapezoidal => self.c2_dense(split),
        }
    }
}

/// Relax one window to convergence with Jacobi block sweeps: every block
/// update within an iteration reads only iterate `k`, so the sweep order
/// (and worker count) cannot change the result.
pub fn wr_solve_window(
    split: &Splitting,
    coeffs: &SchemeCoefficients,
    x_start: &DVector<f64>,
    initial_guess: &Waveform,
    tol: &Tolerances,
) -> Result<(Waveform, WRReport)> {
    wr_solve_window_exec(split, coeffs, x_start, initial_guess, tol, &BlockExecutor::Serial)
}

/// [`wr_solve_window`] with an explicit executor for the block sweeps.
pub fn wr_solve_window_exec(
    split: &Splitting,
    coeffs: &SchemeCoefficients,
    x_start: &DVector<f64>,
    initial_guess: &Waveform,
    tol: &Tolerances,
    exec: &BlockExecutor,
) -> Result<(Waveform, WRReport)> {
    tol.validate()?;
    let n = split.n;
    if x_start.len() != n {
        return Err(Error::DimensionMismatch {
            context: "wr_solve_window start state",
            expected: n,
            found: x_start.len(),
        });
    }
    if initial_guess.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "wr_solve_window initial guess",
            expected: n,
            found: initial_guess.dim(),
        });
    }
    if (initial_guess.h - coeffs.h).abs() > 1e-12 * coeffs.h {
        return Err(Error::InvalidInput(format!(
            "initial guess step {} does not match coefficients step {}",
            initial_guess.h, coeffs.h
        )));
    }
    let s = initial_guess.steps();
    let h = coeffs.h;

    let mut current = initial_guess.values.clone();
    current.column_mut(0).copy_from(x_start);

    let mut residuals = Vec::new();
    let mut converged = false;
    let mut coupling = DMatrix::<f64>::zeros(n, s + 1);

    for k in 1..=tol.max_iterations {
        // coupling terms N x^k_m, shared read-only by all block tasks
        for m in 0..=s {
            let col = current.column(m);
            let mut out = coupling.column_mut(m);
            split
                .n_mat
                .mat_vec_into(col.as_slice(), out.as_mut_slice());
        }

        let current_ref = &current;
        let coupling_ref = &coupling;
        let tasks: Vec<_> = (0..split.block_count())
            .map(|b| {
                move || {
                    sweep_block(
                        split,
                        coeffs,
                        b,
                        x_start,
                        current_ref,
                        coupling_ref,
                        s,
                        h,
                    )
                }
            })
            .collect();
        let block_trajectories = exec.run(tasks);

        let mut next = DMatrix::zeros(n, s + 1);
        next.column_mut(0).copy_from(x_start);
        for (b, traj) in block_trajectories.iter().enumerate() {
            let off = split.block_offsets[b];
            let d = split.block_sizes[b];
            next.view_mut((off, 1), (d, s)).copy_from(&traj.columns(1, s));
        }

        let mut diff = 0.0f64;
        for m in 0..=s {
            for i in 0..n {
                diff = diff.max((next[(i, m)] - current[(i, m)]).abs());
            }
        }
        if !diff.is_finite() {
            return Err(Error::Diverged { iteration: k });
        }
        residuals.push(diff);
        current = next;
        // an exactly reproduced iterate is a fixed point even at epsilon 0
        if diff < tol.epsilon || diff == 0.0 {
            converged = true;
            break;
        }
    }

    let report = WRReport {
        iterations: residuals.len(),
        final_residual: residuals.last().copied().unwrap_or(0.0),
        converged,
        residuals,
    };
    let waveform = Waveform {
        t_start: initial_guess.t_start,
        t_end: initial_guess.t_end,
        h,
        values: current,
    };
    Ok((waveform, report))
}

/// Advance one block through the whole window, reading iterate `k` values
/// through the precomputed coupling matrix.
#[allow(clippy::too_many_arguments)]
fn sweep_block(
    split: &Splitting,
    coeffs: &SchemeCoefficients,
    b: usize,
    x_start: &DVector<f64>,
    _current: &DMatrix<f64>,
    coupling: &DMatrix<f64>,
    s: usize,
    h: f64,
) -> DMatrix<f64> {
    let off = split.block_offsets[b];
    let d = split.block_sizes[b];
    let block = &split.m_blocks[b];
    let mut traj = DMatrix::zeros(d, s + 1);
    for i in 0..d {
        traj[(i, 0)] = x_start[off + i];
    }
    let mut rhs = vec![0.0f64; d];
    let mut tmp = vec![0.0f64; d];
    match coeffs.scheme {
        Scheme::ExplicitEuler => {
            for m in 0..s {
                let prev = traj.column(m);
                block.apply_into(prev.as_slice(), &mut tmp);
                for i in 0..d {
                    rhs[i] = prev[i] + h * (tmp[i] + coupling[(off + i, m)]);
                }
                traj.column_mut(m + 1).copy_from_slice(&rhs);
            }
        }
        Scheme::ImplicitEuler => {
            let lu = &coeffs.block_factors[b];
            for m in 0..s {
                let prev = traj.column(m);
                for i in 0..d {
                    rhs[i] = prev[i] + h * coupling[(off + i, m + 1)];
                }
                lu.solve_slice(&mut rhs);
                traj.column_mut(m + 1).copy_from_slice(&rhs);
            }
        }
        Scheme::Trapezoidal => {
            let lu = &coeffs.block_factors[b];
            let half = h / 2.0;
            for m in 0..s {
                let prev = traj.column(m);
                block.apply_into(prev.as_slice(), &mut tmp);
                for i in 0..d {
                    rhs[i] = prev[i]
                        + half * (tmp[i] + coupling[(off + i, m)] + coupling[(off + i, m + 1)]);
                }
                lu.solve_slice(&mut rhs);
                traj.column_mut(m + 1).copy_from_slice(&rhs);
            }
        }
    }
    traj
}

/// Reference trajectory: the same scheme applied to the full matrix `Q`
/// with no splitting.
pub fn monolithic_solve(sys: &SparseSystem, scheme: Scheme, h: f64) -> Result<Waveform> {
    monolithic_on_interval(sys, scheme, h, 0.0, sys.horizon, &sys.x0)
}

/// Monolithic solve over an arbitrary window (oracle helper).
pub fn monolithic_on_interval(
    sys: &SparseSystem,
    scheme: Scheme,
    h: f64,
    t_start: f64,
    t_end: f64,
    x_start: &DVector<f64>,
) -> Result<Waveform> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(format!("step size must be positive, got {h}")));
    }
    let span = t_end - t_start;
    let s = (span / h).round() as usize;
    if s < 1 || (span - s as f64 * h).abs() > 1e-12 * h.max(span.abs()) {
        return Err(Error::InvalidInput(format!(
            "step size {h} does not divide the interval of length {span}"
        )));
    }
    let n = sys.n;
    let factor = match scheme {
        Scheme::ExplicitEuler => None,
        Scheme::ImplicitEuler | Scheme::Trapezoidal => {
            let a = if scheme == Scheme::ImplicitEuler { h } else { h / 2.0 };
            let mut m = -a * sys.q.to_dense();
            for i in 0..n {
                m[(i, i)] += 1.0;
            }
            Some(LuFactor::new(m)?)
        }
    };

    let mut values = DMatrix::zeros(n, s + 1);
    values.column_mut(0).copy_from(x_start);
    let mut qx = vec![0.0f64; n];
    let mut rhs = vec![0.0f64; n];
    for m in 0..s {
        let prev = values.column(m);
        match scheme {
            Scheme::ExplicitEuler => {
                sys.q.mat_vec_into(prev.as_slice(), &mut qx);
                for i in 0..n {
                    rhs[i] = prev[i] + h * qx[i];
                }
            }
            Scheme::ImplicitEuler => {
                rhs.copy_from_slice(prev.as_slice());
                factor.as_ref().expect("factor built").solve_slice(&mut rhs);
            }
            Scheme::Trapezoidal => {
                sys.q.mat_vec_into(prev.as_slice(), &mut qx);
                for i in 0..n {
                    rhs[i] = prev[i] + (h / 2.0) * qx[i];
                }
                factor.as_ref().expect("factor built").solve_slice(&mut rhs);
            }
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: m });
        }
        values.column_mut(m + 1).copy_from_slice(&rhs);
    }
    Waveform::new(t_start, t_end, h, values)
}
