//! Sparse recovery from `y = A x`: basis pursuit, orthogonal matching
//! pursuit and the exact-recovery predicate.

mod bp;
mod omp;

pub use bp::{basis_pursuit, basis_pursuit_with, BpOptions};
pub use omp::omp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fast::LinearOperator;

/// Default relative error under which a recovery counts as exact.
pub const DEFAULT_REL_TOL: f64 = 1e-5;
/// Default solver tolerance.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-7;

/// A length-`N` vector with `values[i]` at `support[i]` and zeros elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    len: usize,
    support: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSignal {
    /// Pairs are sorted by index; duplicate or out-of-range indices are
    /// rejected.
    pub fn new(len: usize, support: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut pairs: Vec<(usize, f64)> = support.into_iter().zip(values).collect();
        pairs.sort_by_key(|&(i, _)| i);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidParameter(format!(
                    "duplicate support index {}",
                    w[0].0
                )));
            }
        }
        if let Some(&(i, _)) = pairs.last() {
            if i >= len {
                return Err(Error::IndexOutOfRange { index: i, len });
            }
        }
        let (support, values) = pairs.into_iter().unzip();
        Ok(Self {
            len,
            support,
            values,
        })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            support: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.len];
        for (&i, &v) in self.support.iter().zip(&self.values) {
            x[i] = v;
        }
        x
    }

    /// `A x` for this signal.
    pub fn measure(&self, op: &dyn LinearOperator) -> Result<Vec<f64>> {
        if op.ncols() != self.len {
            return Err(Error::DimensionMismatch {
                expected: op.ncols(),
                found: self.len,
            });
        }
        Ok(op.apply(&self.to_dense()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryStatus {
    Converged,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryResult {
    pub estimate: Vec<f64>,
    pub iterations: usize,
    /// `|A estimate - y|_2`, recomputed from the returned estimate.
    pub residual_norm: f64,
    pub status: RecoveryStatus,
}

impl RecoveryResult {
    fn finish(
        op: &dyn LinearOperator,
        y: &[f64],
        estimate: Vec<f64>,
        iterations: usize,
        status: RecoveryStatus,
    ) -> Self {
        let residual_norm = residual_norm(op, &estimate, y);
        Self {
            estimate,
            iterations,
            residual_norm,
            status,
        }
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|a| a.abs()).sum()
}

pub fn residual_norm(op: &dyn LinearOperator, x: &[f64], y: &[f64]) -> f64 {
    let ax = op.apply(x);
    ax.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn check_inputs(op: &dyn LinearOperator, y: &[f64], tol: f64) -> Result<()> {
    if y.len() != op.nrows() {
        return Err(Error::DimensionMismatch {
            expected: op.nrows(),
            found: y.len(),
        });
    }
    if op.nrows() == 0 || op.ncols() == 0 {
        return Err(Error::ZeroDimension {
            rows: op.nrows(),
            cols: op.ncols(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    Ok(())
}

/// Whether `|estimate - truth|_2 / max(|truth|_2, eps) <= rel_tol`.
pub fn is_exact_recovery(truth: &SparseSignal, result: &RecoveryResult, rel_tol: f64) -> bool {
    if result.estimate.len() != truth.len() {
        return false;
    }
    let t = truth.to_dense();
    let err: f64 = t
        .iter()
        .zip(&result.estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    err / norm2(&t).max(f64::EPSILON) <= rel_tol
}
