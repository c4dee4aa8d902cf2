//! Problem instances `ẋ = Qx`, discretized trajectories, and solver
//! tolerances.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::OperatorNorm;
use crate::sparse::SparseMatrix;

/// A linear initial value problem `ẋ = Qx`, `x(0) = x0`, on `[0, T]`.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub n: usize,
    pub q: SparseMatrix,
    pub x0: DVector<f64>,
    pub horizon: f64,
    pub description: String,
}

impl SparseSystem {
    pub fn new(
        q: SparseMatrix,
        x0: DVector<f64>,
        horizon: f64,
        description: impl Into<String>,
    ) -> Result<Self> {
        let n = q.nrows();
        if q.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "system matrix",
                expected: n,
                found: q.ncols(),
            });
        }
        if x0.len() != n {
            return Err(Error::DimensionMismatch {
                context: "initial state",
                expected: n,
                found: x0.len(),
            });
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        Ok(Self {
            n,
            q,
            x0,
            horizon,
            description: description.into(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SystemFile {
    n: usize,
    triplets: Vec<(usize, usize, f64)>,
    x0: Vec<f64>,
    #[serde(rename = "T")]
    horizon: f64,
    #[serde(default)]
    description: String,
}

/// Load a system from its JSON file form
/// `{n, triplets: [[i, j, value]...], x0, T, description}` (0-based
/// indices; duplicate triplets are rejected).
pub fn load_system(path: impl AsRef<Path>) -> Result<SparseSystem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: SystemFile = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })?;
    let q = SparseMatrix::from_triplets(file.n, file.n, &file.triplets)?;
    SparseSystem::new(q, DVector::from_vec(file.x0), file.horizon, file.description)
}

pub fn save_system(sys: &SparseSystem, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = SystemFile {
        n: sys.n,
        triplets: sys.q.triplets(),
        x0: sys.x0.as_slice().to_vec(),
        horizon: sys.horizon,
        description: sys.description.clone(),
    };
    let text = serde_json::to_string_pretty(&file).expect("system serializes");
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Discretized trajectory on a uniform grid: column `m` holds the state at
/// `t_start + m * h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub t_start: f64,
    pub t_end: f64,
    pub h: f64,
    /// `n x (s + 1)` state matrix.
    pub values: DMatrix<f64>,
}

impl Waveform {
    pub fn new(t_start: f64, t_end: f64, h: f64, values: DMatrix<f64>) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidInput(format!("step size must be positive, got {h}")));
        }
        let span = t_end - t_start;
        let s = (span / h).round() as usize;
        if s < 1 {
            return Err(Error::InvalidInput(format!(
                "window [{t_start}, {t_end}] holds no full step of size {h}"
            )));
        }
        if (span - s as f64 * h).abs() > 1e-12 * h.max(span.abs()) {
            return Err(Error::InvalidInput(format!(
                "window length {span} is not an integer multiple of h = {h}"
            )));
        }
        if values.ncols() != s + 1 {
            return Err(Error::DimensionMismatch {
                context: "waveform columns",
                expected: s + 1,
                found: values.ncols(),
            });
        }
        Ok(Self {
            t_start,
            t_end,
            h,
            values,
        })
    }

    /// Constant waveform `x(t) = x` over `s` steps.
    pub fn constant(x: &DVector<f64>, t_start: f64, h: f64, steps: usize) -> Self {
        let values = DMatrix::from_fn(x.len(), steps + 1, |i, _| x[i]);
        Self {
            t_start,
            t_end: t_start + steps as f64 * h,
            h,
            values,
        }
    }

    /// Number of steps `s` (one less than the number of grid columns).
    pub fn steps(&self) -> usize {
        self.values.ncols() - 1
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn time_of(&self, m: usize) -> f64 {
        self.t_start + m as f64 * self.h
    }

    pub fn state_at(&self, m: usize) -> DVector<f64> {
        self.values.column(m).into_owned()
    }

    pub fn final_state(&self) -> DVector<f64> {
        self.state_at(self.steps())
    }

    /// Sup over grid points of the component-wise infinity norm of the
    /// difference; the waveforms must share their grid.
    pub fn sup_inf_distance(&self, other: &Waveform) -> Result<f64> {
        if self.values.shape() != other.values.shape() {
            return Err(Error::DimensionMismatch {
                context: "waveform comparison",
                expected: self.values.ncols(),
                found: other.values.ncols(),
            });
        }
        let mut worst = 0.0f64;
        for m in 0..self.values.ncols() {
            for i in 0..self.values.nrows() {
                worst = worst.max((self.values[(i, m)] - other.values[(i, m)]).abs());
            }
        }
        Ok(worst)
    }

    /// Append a window that starts where `self` ends; the shared boundary
    /// column is kept once.
    pub fn append(&mut self, next: &Waveform) -> Result<()> {
        if (next.t_start - self.t_end).abs() > 1e-9 * self.h {
            return Err(Error::InvalidInput(format!(
                "window starting at {} does not continue one ending at {}",
                next.t_start, self.t_end
            )));
        }
        if (next.h - self.h).abs() > 1e-12 * self.h {
            return Err(Error::InvalidInput("step size changes between windows".into()));
        }
        let old_cols = self.values.ncols();
        let add = next.values.ncols() - 1;
        let mut merged = DMatrix::zeros(self.dim(), old_cols + add);
        merged.columns_mut(0, old_cols).copy_from(&self.values);
        merged
            .columns_mut(old_cols, add)
            .copy_from(&next.values.columns(1, add));
        self.values = merged;
        self.t_end = next.t_end;
        Ok(())
    }

    /// Undo a symmetric permutation of the state variables
    /// (`perm[new] = old`): row `perm[a]` of the result is row `a` of
    /// `self`.
    pub fn unpermute_rows(&self, perm: &[usize]) -> Waveform {
        let mut values = DMatrix::zeros(self.dim(), self.values.ncols());
        for (new, &old) in perm.iter().enumerate() {
            values.row_mut(old).copy_from(&self.values.row(new));
        }
        Waveform {
            t_start: self.t_start,
            t_end: self.t_end,
            h: self.h,
            values,
        }
    }
}

/// Convergence controls for waveform relaxation sweeps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    /// Threshold on the sup-over-steps infinity norm of the change
    /// between successive iterates.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub operator_norm: OperatorNorm,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_iterations: 1000,
            operator_norm: OperatorNorm::InfNorm,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidInput("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_system() -> SparseSystem {
        let q = SparseMatrix::from_triplets(2, 2, &[(0, 0, -1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -1.0)])
            .unwrap();
        SparseSystem::new(q, DVector::from_vec(vec![1.0, 0.0]), 1.0, "toy").unwrap()
    }

    #[test]
    fn system_json_round_trip() {
        let sys = toy_system();
        let dir = std::env::temp_dir().join("wavrelax-system-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sys.json");
        save_system(&sys, &path).unwrap();
        let back = load_system(&path).unwrap();
        assert_eq!(back.n, sys.n);
        assert_eq!(back.q, sys.q);
        assert_eq!(back.x0, sys.x0);
        assert_eq!(back.horizon, sys.horizon);
    }

    #[test]
    fn loader_rejects_duplicate_triplets() {
        let dir = std::env::temp_dir().join("wavrelax-system-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("dup.json");
        std::fs::write(
            &path,
            r#"{"n": 2, "triplets": [[0, 0, -1.0], [0, 0, 1.0]], "x0": [1.0, 0.0], "T": 1.0}"#,
        )
        .unwrap();
        assert!(load_system(&path).is_err());
    }

    #[test]
    fn system_invariants_enforced() {
        let q = SparseMatrix::identity(2);
        assert!(SparseSystem::new(q.clone(), DVector::zeros(3), 1.0, "").is_err());
        assert!(SparseSystem::new(q, DVector::zeros(2), 0.0, "").is_err());
    }

    #[test]
    fn waveform_grid_validation() {
        let vals = DMatrix::zeros(2, 5);
        assert!(Waveform::new(0.0, 1.0, 0.25, vals.clone()).is_ok());
        assert!(Waveform::new(0.0, 1.1, 0.25, vals.clone()).is_err());
        assert!(Waveform::new(0.0, 1.0, 0.2, vals).is_err());
    }

    #[test]
    fn waveform_append_shares_boundary() {
        let a = Waveform::constant(&DVector::from_vec(vec![1.0]), 0.0, 0.5, 2);
        let mut merged = a.clone();
        let b = Waveform::constant(&DVector::from_vec(vec![1.0]), 1.0, 0.5, 2);
        merged.append(&b).unwrap();
        assert_eq!(merged.steps(), 4);
        assert_eq!(merged.t_end, 2.0);
    }

    #[test]
    fn unpermute_restores_order() {
        let mut values = DMatrix::zeros(3, 2);
        values.row_mut(0).fill(10.0);
        values.row_mut(1).fill(20.0);
        values.row_mut(2).fill(30.0);
        let w = Waveform::new(0.0, 1.0, 1.0, values).unwrap();
        // permuted state a holds old variable perm[a]
        let perm = vec![2, 0, 1];
        let back = w.unpermute_rows(&perm);
        assert_eq!(back.values[(2, 0)], 10.0);
        assert_eq!(back.values[(0, 0)], 20.0);
        assert_eq!(back.values[(1, 0)], 30.0);
    }
}
