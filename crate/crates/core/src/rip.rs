//! Empirical restricted isometry constants.
//!
//! For a support `T`, the smallest `delta` with
//! `(1-delta)|z|^2 <= |M_T z|^2 <= (1+delta)|z|^2` is
//! `max(lambda_max - 1, 1 - lambda_min)` over the eigenvalues of the Gram
//! matrix `M_T^T M_T`.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use crate::combin;
use crate::dependency::SupportSet;
use crate::error::{Error, Result};
use crate::matrix::SensingMatrix;
use crate::rng::{derive_seed, rng_from_seed};

/// Largest number of supports an exhaustive sweep will visit.
pub const EXHAUSTIVE_GUARD: u128 = 1_000_000;

const CHUNK: u128 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RipMethod {
    Exhaustive,
    MonteCarlo { samples: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct RipEstimate {
    pub order: usize,
    pub delta: f64,
    pub method: RipMethod,
    pub worst_support: SupportSet,
}

/// `delta` from the extreme eigenvalues of a symmetric Gram matrix.
pub fn delta_from_gram(gram: DMatrix<f64>) -> Result<f64> {
    let (lo, hi) = extreme_eigenvalues(gram)?;
    Ok((hi - 1.0).max(1.0 - lo))
}

pub(crate) fn extreme_eigenvalues(gram: DMatrix<f64>) -> Result<(f64, f64)> {
    if gram.nrows() == 1 {
        return Ok((gram[(0, 0)], gram[(0, 0)]));
    }
    let eig = gram.symmetric_eigenvalues();
    if eig.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite Gram eigenvalue".into()));
    }
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

fn check_support(m: &SensingMatrix, t: &SupportSet) -> Result<()> {
    if let Some(&last) = t.indices().last() {
        if last >= m.ncols() {
            return Err(Error::IndexOutOfRange {
                index: last,
                len: m.ncols(),
            });
        }
    }
    if t.len() > m.nrows() {
        return Err(Error::InvalidParameter(format!(
            "|T| = {} exceeds row count {}",
            t.len(),
            m.nrows()
        )));
    }
    Ok(())
}

fn column_submatrix(m: &SensingMatrix, t: &[usize]) -> DMatrix<f64> {
    m.entries().select_columns(t)
}

/// Restricted isometry constant of the single support `t`.
pub fn delta_for_support(m: &SensingMatrix, t: &SupportSet) -> Result<f64> {
    check_support(m, t)?;
    let sub = column_submatrix(m, t.indices());
    delta_from_gram(sub.tr_mul(&sub))
}

/// The same constant from the extreme singular values of `M_T`.
pub fn delta_for_support_svd(m: &SensingMatrix, t: &SupportSet) -> Result<f64> {
    check_support(m, t)?;
    let sub = column_submatrix(m, t.indices());
    let sv = sub.singular_values();
    let hi = sv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // fewer rows than columns cannot happen after check_support
    let lo = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((hi * hi - 1.0).max(1.0 - lo * lo))
}

#[derive(Debug, Clone)]
struct Candidate {
    delta: f64,
    support: Vec<usize>,
}

impl Candidate {
    /// Larger delta wins; ties go to the lexicographically smaller support.
    fn better(self, other: Self) -> Self {
        match self.delta.partial_cmp(&other.delta) {
            Some(Ordering::Greater) => self,
            Some(Ordering::Less) => other,
            _ => {
                if self.support <= other.support {
                    self
                } else {
                    other
                }
            }
        }
    }
}

/// Precomputed `M^T M` so each support only reads a submatrix.
struct GramTable {
    gram: DMatrix<f64>,
}

impl GramTable {
    fn new(m: &SensingMatrix) -> Self {
        Self {
            gram: m.entries().tr_mul(m.entries()),
        }
    }

    fn delta(&self, t: &[usize]) -> Result<f64> {
        let k = t.len();
        let sub = DMatrix::from_fn(k, k, |i, j| self.gram[(t[i], t[j])]);
        delta_from_gram(sub)
    }
}

fn check_order(m: &SensingMatrix, order: usize) -> Result<()> {
    if order == 0 || order > m.ncols() {
        return Err(Error::InvalidParameter(format!(
            "order {order} outside 1..={}",
            m.ncols()
        )));
    }
    if order > m.nrows() {
        return Err(Error::InvalidParameter(format!(
            "order {order} exceeds row count {}",
            m.nrows()
        )));
    }
    Ok(())
}

/// Exact `delta_m`: the maximum over every support of size exactly `order`.
/// Subsets of a support never have a larger constant, so smaller supports
/// need not be visited.
pub fn delta_exhaustive(m: &SensingMatrix, order: usize) -> Result<RipEstimate> {
    check_order(m, order)?;
    let n_cols = m.ncols();
    let total = combin::binomial(n_cols, order);
    if total > EXHAUSTIVE_GUARD {
        return Err(Error::GuardExceeded {
            count: total,
            limit: EXHAUSTIVE_GUARD,
        });
    }
    let table = GramTable::new(m);
    let chunks = total.div_ceil(CHUNK) as usize;
    let best = (0..chunks)
        .into_par_iter()
        .map(|ci| -> Result<Option<Candidate>> {
            let start = ci as u128 * CHUNK;
            let count = CHUNK.min(total - start);
            let mut best: Option<Candidate> = None;
            let mut err = None;
            combin::for_each_in_range(n_cols, order, start, count, |t| {
                if err.is_some() {
                    return;
                }
                match table.delta(t) {
                    Ok(delta) => {
                        let cand = Candidate {
                            delta,
                            support: t.to_vec(),
                        };
                        best = Some(match best.take() {
                            Some(b) => b.better(cand),
                            None => cand,
                        });
                    }
                    Err(e) => err = Some(e),
                }
            });
            match err {
                Some(e) => Err(e),
                None => Ok(best),
            }
        })
        .try_reduce(|| None, |a, b| Ok(merge(a, b)))?
        .ok_or_else(|| Error::Numerical("no supports visited".into()))?;
    Ok(RipEstimate {
        order,
        delta: best.delta,
        method: RipMethod::Exhaustive,
        worst_support: SupportSet::from_sorted(best.support),
    })
}

fn merge(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.better(b)),
        (a, None) => a,
        (None, b) => b,
    }
}

/// Lower bound on `delta_m` from `samples` uniformly random supports. Sample
/// `i` is drawn from its own seed `(seed, i)`.
pub fn delta_monte_carlo(
    m: &SensingMatrix,
    order: usize,
    samples: usize,
    seed: u64,
) -> Result<RipEstimate> {
    check_order(m, order)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let n_cols = m.ncols();
    let table = GramTable::new(m);
    let best = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<Option<Candidate>> {
            let mut rng = rng_from_seed(derive_seed(&[seed, i as u64]));
            let mut t = sample(&mut rng, n_cols, order).into_vec();
            t.sort_unstable();
            let delta = table.delta(&t)?;
            Ok(Some(Candidate { delta, support: t }))
        })
        .try_reduce(|| None, |a, b| Ok(merge(a, b)))?
        .ok_or_else(|| Error::Numerical("no supports visited".into()))?;
    Ok(RipEstimate {
        order,
        delta: best.delta,
        method: RipMethod::MonteCarlo { samples },
        worst_support: SupportSet::from_sorted(best.support),
    })
}

/// Largest normalized inner product between two distinct columns.
pub fn coherence(m: &SensingMatrix) -> Result<f64> {
    let e = m.entries();
    if e.ncols() < 2 {
        return Err(Error::InvalidParameter(
            "coherence needs at least two columns".into(),
        ));
    }
    let norms: Vec<f64> = e.column_iter().map(|c| c.norm()).collect();
    if let Some(j) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::InvalidParameter(format!("column {j} is zero")));
    }
    let gram = e.tr_mul(e);
    let mut best = 0.0f64;
    for i in 0..e.ncols() {
        for j in i + 1..e.ncols() {
            best = best.max(gram[(i, j)].abs() / (norms[i] * norms[j]));
        }
    }
    Ok(best)
}
