//! Deterministic sensing matrices from polynomial graphs over `Z_p`.
//!
//! Each column is the indicator of the graph `{(x, f(x)) : x in Z_p}` of a
//! polynomial of degree at most `r`, laid out as a `p^2` vector with
//! position `x*p + f(x)`. Two distinct graphs share at most `r` points, which
//! bounds every off-diagonal Gram entry.
//!
//! Polynomials are indexed by `i = a_0 + a_1 p + ... + a_r p^r`, so
//! increasing index is lexicographic order over `(a_r, ..., a_0)` with the
//! leading coefficient most significant.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combin;
use crate::dependency::SupportSet;
use crate::error::{Error, Result};
use crate::matrix::{
    BlockStructureSpec, DistKind, EntryDistribution, MatrixKind, NestedSpec, SensingMatrix,
};
use crate::rip::extreme_eigenvalues;

/// Largest number of supports [`verify_theorem3`] will visit for one order.
pub const THEOREM3_GUARD: u128 = 1_000_000_000;

const CHUNK: u128 = 1 << 16;
const EIG_TOL: f64 = 1e-12;

pub fn is_prime(p: usize) -> bool {
    if p < 2 {
        return false;
    }
    let mut i = 2;
    while i * i <= p {
        if p.is_multiple_of(i) {
            return false;
        }
        i += 1;
    }
    true
}

/// `p^(r+1)`, the number of polynomials of degree at most `r`.
pub fn polynomial_count(p: usize, r: usize) -> Result<usize> {
    p.checked_pow((r + 1) as u32)
        .ok_or_else(|| Error::InvalidParameter(format!("{p}^{} overflows", r + 1)))
}

/// Parameters of the block construction: `t` block columns and `s` block
/// rows of `p^2 x l` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolySpec {
    pub p: usize,
    pub r: usize,
    pub t: usize,
    pub s: usize,
    pub l: usize,
}

impl PolySpec {
    /// The single-block matrix with `cols` columns.
    pub fn devore(p: usize, r: usize, cols: usize) -> Self {
        Self {
            p,
            r,
            t: 1,
            s: 1,
            l: cols,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !is_prime(self.p) {
            return Err(Error::InvalidParameter(format!(
                "p = {} is not prime",
                self.p
            )));
        }
        if self.r == 0 || self.r >= self.p {
            return Err(Error::InvalidParameter(format!(
                "need 0 < r < p, got r = {}",
                self.r
            )));
        }
        if self.t == 0 || self.s == 0 || self.l == 0 {
            return Err(Error::ZeroDimension {
                rows: self.s * self.p * self.p,
                cols: self.t * self.l,
            });
        }
        let total = polynomial_count(self.p, self.r)?;
        let cols = self
            .t
            .checked_mul(self.l)
            .ok_or_else(|| Error::InvalidParameter("t*l overflows".into()))?;
        if cols > total {
            return Err(Error::InvalidParameter(format!(
                "t*l = {cols} exceeds p^(r+1) = {total}"
            )));
        }
        Ok(())
    }

    pub fn nrows(&self) -> usize {
        self.s * self.p * self.p
    }

    pub fn ncols(&self) -> usize {
        self.t * self.l
    }

    /// Largest sparsity the RIP guarantee covers: the largest `m < p/r + 1`.
    pub fn max_order(&self) -> usize {
        self.p / self.r + usize::from(!self.p.is_multiple_of(self.r))
    }

    /// `(m-1) r / p`.
    pub fn delta_bound(&self, m: usize) -> f64 {
        (m.saturating_sub(1) * self.r) as f64 / self.p as f64
    }

    /// Matrix-core encoding: a Toeplitz block layout with `k = t`,
    /// `l = s`, `p^2 x l` blocks.
    pub fn to_block_spec(&self) -> BlockStructureSpec {
        BlockStructureSpec {
            kind: MatrixKind::Deterministic,
            k: self.t,
            l: self.s,
            d: self.p * self.p,
            e: self.l,
            nested: Some(NestedSpec::Polynomial {
                p: self.p,
                r: self.r,
            }),
            distribution: EntryDistribution::new(DistKind::Bernoulli, self.s * self.p),
            seed: 0,
        }
    }

    pub fn from_block_spec(spec: &BlockStructureSpec) -> Result<Self> {
        match (spec.kind, spec.nested) {
            (MatrixKind::Deterministic, Some(NestedSpec::Polynomial { p, r })) => {
                let ps = Self {
                    p,
                    r,
                    t: spec.k,
                    s: spec.l,
                    l: spec.e,
                };
                ps.validate()?;
                Ok(ps)
            }
            _ => Err(Error::WrongKind {
                expected: "deterministic",
                found: spec.kind.to_string(),
            }),
        }
    }

    /// Polynomial index of the column `i` of block `j` in the block
    /// sequence. Blocks are filled with consecutive polynomials, wrapping
    /// modulo `p^(r+1)`; any `t` consecutive blocks use distinct polynomials.
    fn poly_index(&self, j: usize, i: usize) -> usize {
        let total = self.p.pow((self.r + 1) as u32);
        (j * self.l + i) % total
    }
}

/// Coefficients `(a_0, ..., a_r)` of polynomial number `index`.
pub fn coefficients(p: usize, r: usize, index: usize) -> Vec<usize> {
    let mut rest = index;
    (0..=r)
        .map(|_| {
            let a = rest % p;
            rest /= p;
            a
        })
        .collect()
}

/// The first `count` polynomials of degree at most `r`, as `(a_0, ..., a_r)`
/// tuples ordered lexicographically with `a_r` most significant.
pub fn enumerate_polynomials(p: usize, r: usize, count: usize) -> Result<Vec<Vec<usize>>> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!(
            "p = {p} must be at least 2"
        )));
    }
    let total = polynomial_count(p, r)?;
    if count > total {
        return Err(Error::InvalidParameter(format!(
            "count {count} exceeds p^(r+1) = {total}"
        )));
    }
    Ok((0..count).map(|i| coefficients(p, r, i)).collect())
}

/// `f(x) mod p` by Horner's rule.
pub fn evaluate(p: usize, coeffs: &[usize], x: usize) -> usize {
    coeffs.iter().rev().fold(0, |acc, &a| (acc * x + a) % p)
}

/// Indicator of the graph of `f` in `{0,1}^(p^2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphVector {
    pub coeffs: Vec<usize>,
    pub bits: Vec<u8>,
}

impl GraphVector {
    pub fn ones(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn graph_vector(p: usize, coeffs: &[usize]) -> Result<GraphVector> {
    if let Some(&a) = coeffs.iter().find(|&&a| a >= p) {
        return Err(Error::InvalidParameter(format!(
            "coefficient {a} not in Z_{p}"
        )));
    }
    let mut bits = vec![0u8; p * p];
    for x in 0..p {
        bits[x * p + evaluate(p, coeffs, x)] = 1;
    }
    Ok(GraphVector {
        coeffs: coeffs.to_vec(),
        bits,
    })
}

/// The unscaled 0/1 matrix `Psi_0`.
pub fn integer_matrix(spec: &PolySpec) -> Result<DMatrix<u8>> {
    spec.validate()?;
    let (p, r) = (spec.p, spec.r);
    let d = p * p;
    let mut out = DMatrix::<u8>::zeros(spec.nrows(), spec.ncols());
    for a in 0..spec.s {
        for c in 0..spec.t {
            let j = spec.t - 1 + a - c;
            for i in 0..spec.l {
                let coeffs = coefficients(p, r, spec.poly_index(j, i));
                for x in 0..p {
                    out[(a * d + x * p + evaluate(p, &coeffs, x), c * spec.l + i)] = 1;
                }
            }
        }
    }
    Ok(out)
}

/// `Psi = Psi_0 / sqrt(s p)`: unit-norm columns.
pub fn build_devore_block(spec: &PolySpec) -> Result<SensingMatrix> {
    spec.validate()?;
    let scale = 1.0 / ((spec.s * spec.p) as f64).sqrt();
    let (p, r, l) = (spec.p, spec.r, spec.l);
    let d = p * p;
    let mut variables = Vec::with_capacity((spec.t + spec.s - 1) * d * l);
    for j in 0..spec.t + spec.s - 1 {
        let mut block = vec![0.0; d * l];
        for i in 0..l {
            let coeffs = coefficients(p, r, spec.poly_index(j, i));
            for x in 0..p {
                block[(x * p + evaluate(p, &coeffs, x)) * l + i] = scale;
            }
        }
        variables.extend(block);
    }
    Ok(SensingMatrix::from_variables(
        spec.to_block_spec(),
        variables,
    ))
}

/// The `p^2 x cols` matrix of the first `cols` polynomial graphs, scaled by
/// `1/sqrt(p)`.
pub fn build_devore(p: usize, r: usize, cols: usize) -> Result<SensingMatrix> {
    build_devore_block(&PolySpec::devore(p, r, cols))
}

/// `Psi_0^T Psi_0` in exact integers.
pub fn integer_gram(spec: &PolySpec) -> Result<DMatrix<u32>> {
    let m = integer_matrix(spec)?.map(u32::from);
    Ok(m.tr_mul(&m))
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem3Report {
    pub spec: PolySpec,
    pub m: usize,
    /// `(m-1) r / p`.
    pub delta_bound: f64,
    /// Largest eigenvalue-based constant over all supports.
    pub worst_delta: f64,
    pub worst_support: SupportSet,
    /// Largest raw off-diagonal inner product, compared against `s r`.
    pub max_inner: u32,
    /// Largest raw off-diagonal row sum, compared against `(m-1) s r`.
    pub max_row_sum: u32,
    pub supports_checked: u128,
    pub pass: bool,
}

#[derive(Debug, Clone)]
struct Worst {
    delta: f64,
    support: Vec<usize>,
    max_inner: u32,
    max_row_sum: u32,
    gershgorin_ok: bool,
}

impl Worst {
    fn merge(self, other: Self) -> Self {
        let take_other = match other.delta.partial_cmp(&self.delta) {
            Some(std::cmp::Ordering::Greater) => true,
            Some(std::cmp::Ordering::Equal) => other.support < self.support,
            _ => false,
        };
        let (delta, support) = if take_other {
            (other.delta, other.support)
        } else {
            (self.delta, self.support)
        };
        Worst {
            delta,
            support,
            max_inner: self.max_inner.max(other.max_inner),
            max_row_sum: self.max_row_sum.max(other.max_row_sum),
            gershgorin_ok: self.gershgorin_ok && other.gershgorin_ok,
        }
    }
}

fn merge_opt(a: Option<Worst>, b: Option<Worst>) -> Option<Worst> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.merge(b)),
        (a, None) => a,
        (None, b) => b,
    }
}

/// Exhaustive check of the RIP guarantee `delta = (m-1) r / p` over every
/// support of size `m`.
///
/// Off-diagonal entries and row sums are checked in integers; eigenvalues
/// are computed once per distinct off-diagonal pattern, since supports with
/// equal patterns share a Gram matrix.
pub fn verify_theorem3(spec: &PolySpec, m: usize) -> Result<Theorem3Report> {
    spec.validate()?;
    if m == 0 || m > spec.max_order() {
        return Err(Error::InvalidParameter(format!(
            "m = {m} outside 1..={} (need m < p/r + 1)",
            spec.max_order()
        )));
    }
    let n_cols = spec.ncols();
    if m > n_cols {
        return Err(Error::InvalidParameter(format!(
            "m = {m} exceeds column count {n_cols}"
        )));
    }
    let total = combin::binomial(n_cols, m);
    if total > THEOREM3_GUARD {
        return Err(Error::GuardExceeded {
            count: total,
            limit: THEOREM3_GUARD,
        });
    }
    let gram = integer_gram(spec)?;
    let diag = (spec.s * spec.p) as u32;
    let inner_cap = (spec.s * spec.r) as u32;
    let scale = 1.0 / diag as f64;
    let pairs = m * (m - 1) / 2;
    let base = inner_cap as u128 + 1;
    // patterns are keyed by base-(s r + 1) digits when they fit in a u128
    let keyed = (base as f64).log2() * pairs as f64 <= 127.0;

    let chunks = total.div_ceil(CHUNK) as usize;
    let worst = (0..chunks)
        .into_par_iter()
        .map_init(
            HashMap::<u128, (f64, f64)>::new,
            |cache, ci| -> Result<Option<Worst>> {
                let start = ci as u128 * CHUNK;
                let count = CHUNK.min(total - start);
                let mut worst: Option<Worst> = None;
                let mut err = None;
                let mut off = vec![0u32; pairs];
                combin::for_each_in_range(n_cols, m, start, count, |t| {
                    if err.is_some() {
                        return;
                    }
                    let mut key = 0u128;
                    let mut max_inner = 0u32;
                    let mut row_sums = [0u32; 64];
                    let mut idx = 0;
                    for i in 0..m {
                        for j in i + 1..m {
                            let g = gram[(t[i], t[j])];
                            off[idx] = g;
                            idx += 1;
                            max_inner = max_inner.max(g);
                            if i < 64 {
                                row_sums[i] += g;
                            }
                            if j < 64 {
                                row_sums[j] += g;
                            }
                            if keyed {
                                key = key * base + u128::from(g.min(inner_cap));
                            }
                        }
                    }
                    let max_row_sum = row_sums[..m.min(64)].iter().copied().max().unwrap_or(0);
                    let eig = |off: &[u32]| -> Result<(f64, f64)> {
                        let mut g = DMatrix::<f64>::identity(m, m);
                        let mut idx = 0;
                        for i in 0..m {
                            for j in i + 1..m {
                                let v = off[idx] as f64 * scale;
                                g[(i, j)] = v;
                                g[(j, i)] = v;
                                idx += 1;
                            }
                        }
                        extreme_eigenvalues(g)
                    };
                    let eigs = if keyed && max_inner <= inner_cap {
                        match cache.get(&key) {
                            Some(&v) => Ok(v),
                            None => eig(&off).inspect(|&v| {
                                cache.insert(key, v);
                            }),
                        }
                    } else {
                        eig(&off)
                    };
                    let (lo, hi) = match eigs {
                        Ok(v) => v,
                        Err(e) => {
                            err = Some(e);
                            return;
                        }
                    };
                    let delta = (hi - 1.0).max(1.0 - lo).max(0.0);
                    let gershgorin = max_row_sum as f64 * scale;
                    let cand = Worst {
                        delta,
                        support: t.to_vec(),
                        max_inner,
                        max_row_sum,
                        gershgorin_ok: delta <= gershgorin + EIG_TOL,
                    };
                    worst = Some(match worst.take() {
                        Some(w) => w.merge(cand),
                        None => cand,
                    });
                });
                match err {
                    Some(e) => Err(e),
                    None => Ok(worst),
                }
            },
        )
        .try_reduce(|| None, |a, b| Ok(merge_opt(a, b)))?
        .ok_or_else(|| Error::Numerical("no supports visited".into()))?;

    let delta_bound = spec.delta_bound(m);
    let pass = worst.max_inner <= inner_cap
        && worst.max_row_sum as usize <= (m - 1) * spec.s * spec.r
        && worst.delta <= delta_bound + EIG_TOL
        && worst.gershgorin_ok;
    Ok(Theorem3Report {
        spec: *spec,
        m,
        delta_bound,
        worst_delta: worst.delta,
        worst_support: SupportSet::from_sorted(worst.support),
        max_inner: worst.max_inner,
        max_row_sum: worst.max_row_sum,
        supports_checked: total,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes() {
        let ps: Vec<usize> = (0..30).filter(|&p| is_prime(p)).collect();
        assert_eq!(ps, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
    }

    #[test]
    fn lexicographic_enumeration() {
        let all = enumerate_polynomials(3, 1, 9).unwrap();
        // (a_1, a_0) read most-significant first
        let keys: Vec<(usize, usize)> = all.iter().map(|c| (c[1], c[0])).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(keys.first(), Some(&(0, 0)));
        assert_eq!(keys.last(), Some(&(2, 2)));
        assert_eq!(
            enumerate_polynomials(2, 1, 2).unwrap(),
            vec![vec![0, 0], vec![1, 0]]
        );
        assert!(enumerate_polynomials(3, 1, 10).is_err());
    }

    #[test]
    fn graph_vectors() {
        assert_eq!(graph_vector(3, &[0, 1]).unwrap().ones(), vec![0, 4, 8]);
        assert_eq!(graph_vector(3, &[0, 0]).unwrap().ones(), vec![0, 3, 6]);
        // x^2 + 1 over Z_5: 1, 2, 0, 0, 2
        assert_eq!(
            graph_vector(5, &[1, 0, 1]).unwrap().ones(),
            vec![1, 7, 10, 15, 22]
        );
        assert!(graph_vector(3, &[3]).is_err());
    }

    #[test]
    fn devore_columns() {
        let m = build_devore(3, 1, 9).unwrap();
        assert_eq!(m.entries().shape(), (9, 9));
        for c in m.entries().column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-15);
        }
        // f = x is index 3, g = x + 1 is index 4
        let e = m.entries();
        assert_eq!(e.column(3).dot(&e.column(4)), 0.0);
    }

    #[test]
    fn example_block_shape() {
        let spec = PolySpec {
            p: 3,
            r: 1,
            t: 3,
            s: 2,
            l: 3,
        };
        let m = build_devore_block(&spec).unwrap();
        assert_eq!(m.entries().shape(), (18, 9));
        let ints = integer_matrix(&spec).unwrap();
        for (c, col) in ints.column_iter().enumerate() {
            assert_eq!(col.iter().map(|&v| v as usize).sum::<usize>(), 6);
            assert!((m.entries().column(c).norm() - 1.0).abs() < 1e-15);
        }
        let scaled = ints.map(|v| v as f64 / 6f64.sqrt());
        assert_eq!(&scaled, m.entries());
    }

    #[test]
    fn single_block_reduces_to_devore() {
        let a = build_devore_block(&PolySpec {
            p: 5,
            r: 1,
            t: 1,
            s: 1,
            l: 20,
        })
        .unwrap();
        let b = build_devore(5, 1, 20).unwrap();
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn spec_validation() {
        assert!(PolySpec {
            p: 4,
            r: 1,
            t: 1,
            s: 1,
            l: 4
        }
        .validate()
        .is_err());
        assert!(PolySpec {
            p: 3,
            r: 3,
            t: 1,
            s: 1,
            l: 4
        }
        .validate()
        .is_err());
        assert!(PolySpec {
            p: 3,
            r: 1,
            t: 4,
            s: 1,
            l: 3
        }
        .validate()
        .is_err());
        assert!(PolySpec {
            p: 3,
            r: 1,
            t: 3,
            s: 5,
            l: 3
        }
        .validate()
        .is_ok());
        assert_eq!(PolySpec::devore(3, 1, 9).max_order(), 3);
        assert_eq!(PolySpec::devore(7, 2, 9).max_order(), 4);
        assert_eq!(PolySpec::devore(5, 2, 9).max_order(), 3);
    }

    #[test]
    fn block_spec_round_trip() {
        let spec = PolySpec {
            p: 3,
            r: 1,
            t: 3,
            s: 2,
            l: 3,
        };
        let bs = spec.to_block_spec();
        bs.validate().unwrap();
        assert_eq!((bs.n(), bs.big_n()), (18, 9));
        assert_eq!(PolySpec::from_block_spec(&bs).unwrap(), spec);
    }

    #[test]
    fn theorem3_small_cases() {
        let spec = PolySpec::devore(3, 1, 9);
        let one = verify_theorem3(&spec, 1).unwrap();
        assert!(one.pass);
        assert!(one.worst_delta.abs() < 1e-12);
        let two = verify_theorem3(&spec, 2).unwrap();
        assert_eq!(two.supports_checked, 36);
        assert!(two.pass && two.worst_delta <= 1.0 / 3.0 + 1e-12);
        assert!(verify_theorem3(&spec, 4).is_err());
        let block = verify_theorem3(
            &PolySpec {
                p: 3,
                r: 1,
                t: 3,
                s: 2,
                l: 3,
            },
            3,
        )
        .unwrap();
        assert!(block.pass, "{block:?}");
    }
}
