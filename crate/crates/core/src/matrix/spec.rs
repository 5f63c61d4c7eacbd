use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    Gaussian,
    Bernoulli,
    SparseTernary,
}

impl fmt::Display for DistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistKind::Gaussian => "gaussian",
            DistKind::Bernoulli => "bernoulli",
            DistKind::SparseTernary => "sparse_ternary",
        })
    }
}

/// One of the three zero-mean entry laws, normalized by a row count `n` so
/// that a column of `n` samples has unit expected squared norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryDistribution {
    pub kind: DistKind,
    pub scale_rows: usize,
}

impl EntryDistribution {
    pub fn new(kind: DistKind, scale_rows: usize) -> Self {
        Self { kind, scale_rows }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale_rows == 0 {
            return Err(Error::InvalidParameter(
                "scale_rows must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n = self.scale_rows as f64;
        match self.kind {
            DistKind::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                z / n.sqrt()
            }
            DistKind::Bernoulli => {
                let a = 1.0 / n.sqrt();
                if rng.random::<bool>() {
                    a
                } else {
                    -a
                }
            }
            DistKind::SparseTernary => {
                let a = (3.0 / n).sqrt();
                match rng.random_range(0..6u8) {
                    0 => a,
                    1 => -a,
                    _ => 0.0,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Iid,
    ToeplitzBlock,
    CirculantBlock,
    CirculantCirculant,
    CirculantCirculantBlock,
    Deterministic,
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixKind::Iid => "iid",
            MatrixKind::ToeplitzBlock => "toeplitz_block",
            MatrixKind::CirculantBlock => "circulant_block",
            MatrixKind::CirculantCirculant => "circulant_circulant",
            MatrixKind::CirculantCirculantBlock => "circulant_circulant_block",
            MatrixKind::Deterministic => "deterministic",
        })
    }
}

/// Inner structure of a block.
///
/// `Circulant` describes each outer block as a circulant arrangement of
/// `k2` independent `d2 x e2` blocks over `l2` block rows. `Polynomial`
/// carries the field size and degree bound of the deterministic
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NestedSpec {
    Circulant {
        k2: usize,
        l2: usize,
        d2: usize,
        e2: usize,
    },
    Polynomial {
        p: usize,
        r: usize,
    },
}

/// Declarative description of a sensing matrix.
///
/// The outer grid has `l` block rows and `k` block columns of `d x e`
/// blocks, so the matrix is `(l*d) x (k*e)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStructureSpec {
    pub kind: MatrixKind,
    pub k: usize,
    pub l: usize,
    pub d: usize,
    pub e: usize,
    #[serde(default)]
    pub nested: Option<NestedSpec>,
    pub distribution: EntryDistribution,
    pub seed: u64,
}

impl BlockStructureSpec {
    /// An `rows x cols` IID matrix with `dist` normalized by `rows`.
    pub fn iid(rows: usize, cols: usize, dist: DistKind, seed: u64) -> Self {
        Self {
            kind: MatrixKind::Iid,
            k: cols,
            l: rows,
            d: 1,
            e: 1,
            nested: None,
            distribution: EntryDistribution::new(dist, rows),
            seed,
        }
    }

    pub fn toeplitz_block(
        k: usize,
        l: usize,
        d: usize,
        e: usize,
        dist: DistKind,
        seed: u64,
    ) -> Self {
        Self {
            kind: MatrixKind::ToeplitzBlock,
            k,
            l,
            d,
            e,
            nested: None,
            distribution: EntryDistribution::new(dist, l * d),
            seed,
        }
    }

    pub fn circulant_block(
        k: usize,
        l: usize,
        d: usize,
        e: usize,
        dist: DistKind,
        seed: u64,
    ) -> Self {
        Self {
            kind: MatrixKind::CirculantBlock,
            ..Self::toeplitz_block(k, l, d, e, dist, seed)
        }
    }

    /// Circulant block matrix whose `d x e` blocks are themselves circulant
    /// in `e` independent scalars.
    pub fn circulant_circulant(
        k: usize,
        l: usize,
        d: usize,
        e: usize,
        dist: DistKind,
        seed: u64,
    ) -> Self {
        Self {
            kind: MatrixKind::CirculantCirculant,
            ..Self::toeplitz_block(k, l, d, e, dist, seed)
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn circulant_circulant_block(
        k1: usize,
        l1: usize,
        k2: usize,
        l2: usize,
        d2: usize,
        e2: usize,
        dist: DistKind,
        seed: u64,
    ) -> Self {
        Self {
            kind: MatrixKind::CirculantCirculantBlock,
            k: k1,
            l: l1,
            d: l2 * d2,
            e: k2 * e2,
            nested: Some(NestedSpec::Circulant { k2, l2, d2, e2 }),
            distribution: EntryDistribution::new(dist, l1 * l2 * d2),
            seed,
        }
    }

    /// Row count `l * d`.
    pub fn n(&self) -> usize {
        self.l * self.d
    }

    /// Column count `k * e`.
    pub fn big_n(&self) -> usize {
        self.k * self.e
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l == 0 || self.d == 0 || self.e == 0 {
            return Err(Error::ZeroDimension {
                rows: self.n(),
                cols: self.big_n(),
            });
        }
        self.n()
            .checked_mul(self.big_n())
            .ok_or_else(|| Error::InconsistentDims("matrix size overflows".into()))?;
        self.distribution.validate()?;
        match (self.kind, self.nested) {
            (MatrixKind::Iid | MatrixKind::ToeplitzBlock | MatrixKind::CirculantBlock, None) => {
                Ok(())
            }
            (MatrixKind::CirculantCirculant, None) => Ok(()),
            (MatrixKind::CirculantCirculant, Some(NestedSpec::Circulant { k2, l2, d2, e2 })) => {
                if d2 == 1 && e2 == 1 && k2 == self.e && l2 == self.d {
                    Ok(())
                } else {
                    Err(Error::InconsistentDims(format!(
                        "circulant-circulant blocks are scalar circulants: need d2=e2=1, k2=e={}, l2=d={}",
                        self.e, self.d
                    )))
                }
            }
            (
                MatrixKind::CirculantCirculantBlock,
                Some(NestedSpec::Circulant { k2, l2, d2, e2 }),
            ) => {
                if k2 == 0 || l2 == 0 || d2 == 0 || e2 == 0 {
                    return Err(Error::InconsistentDims(
                        "inner dimensions must be positive".into(),
                    ));
                }
                if self.d != l2 * d2 || self.e != k2 * e2 {
                    return Err(Error::InconsistentDims(format!(
                        "need d = l2*d2 ({} != {}) and e = k2*e2 ({} != {})",
                        self.d,
                        l2 * d2,
                        self.e,
                        k2 * e2
                    )));
                }
                Ok(())
            }
            (MatrixKind::Deterministic, Some(NestedSpec::Polynomial { p, r })) => {
                crate::deterministic::PolySpec {
                    p,
                    r,
                    t: self.k,
                    s: self.l,
                    l: self.e,
                }
                .validate()?;
                if self.d != p * p {
                    return Err(Error::InconsistentDims(format!(
                        "deterministic blocks have p^2 = {} rows, got d = {}",
                        p * p,
                        self.d
                    )));
                }
                Ok(())
            }
            (kind, nested) => Err(Error::Unsupported(format!(
                "kind {kind} with nested spec {nested:?}"
            ))),
        }
    }

    /// Block column containing matrix column `col`.
    pub fn column_block_of(&self, col: usize) -> Result<usize> {
        if col >= self.big_n() {
            return Err(Error::IndexOutOfRange {
                index: col,
                len: self.big_n(),
            });
        }
        Ok(col / self.e)
    }

    /// Number of distinct outer blocks the layout draws from.
    pub fn outer_block_count(&self) -> usize {
        match self.kind {
            MatrixKind::Iid => 1,
            MatrixKind::ToeplitzBlock | MatrixKind::Deterministic => self.k + self.l - 1,
            _ => self.k,
        }
    }

    /// Outer block id at block position `(a, c)`, 0-based.
    ///
    /// Toeplitz: `k-1+a-c`. Circulant: the same index reduced modulo `k`;
    /// for `l-1 > k` the reduction extends the displayed pattern.
    pub(crate) fn outer_block_id(&self, a: usize, c: usize) -> usize {
        let j = self.k - 1 + a - c;
        match self.kind {
            MatrixKind::Iid => 0,
            MatrixKind::ToeplitzBlock | MatrixKind::Deterministic => j,
            _ => j % self.k,
        }
    }

    /// Length of the Toeplitz block sequence `k-1+a-c` ranges over.
    pub(crate) fn sequence_len(&self) -> usize {
        self.k + self.l - 1
    }

    /// Number of scalar random variables per outer block.
    pub(crate) fn inner_count(&self) -> usize {
        match (self.kind, self.nested) {
            (MatrixKind::CirculantCirculant, _) => self.e,
            (
                MatrixKind::CirculantCirculantBlock,
                Some(NestedSpec::Circulant { k2, d2, e2, .. }),
            ) => k2 * d2 * e2,
            _ => self.d * self.e,
        }
    }

    /// Label of the entry at within-block position `(r, s)`.
    pub(crate) fn inner_label(&self, r: usize, s: usize) -> usize {
        match (self.kind, self.nested) {
            (MatrixKind::CirculantCirculant, _) => (self.e - 1 + r - s) % self.e,
            (
                MatrixKind::CirculantCirculantBlock,
                Some(NestedSpec::Circulant { k2, d2, e2, .. }),
            ) => {
                let (a2, r2) = (r / d2, r % d2);
                let (c2, s2) = (s / e2, s % e2);
                let u = (k2 - 1 + a2 - c2) % k2;
                (u * d2 + r2) * e2 + s2
            }
            _ => r * self.e + s,
        }
    }

    /// Label of the scalar random variable at matrix position `(row, col)`.
    pub(crate) fn label(&self, row: usize, col: usize) -> usize {
        if self.kind == MatrixKind::Iid {
            return row * self.big_n() + col;
        }
        let (a, r) = (row / self.d, row % self.d);
        let (c, s) = (col / self.e, col % self.e);
        self.outer_block_id(a, c) * self.inner_count() + self.inner_label(r, s)
    }

    /// Number of distinct labels, i.e. independent scalar variables.
    pub fn variable_count(&self) -> usize {
        match self.kind {
            MatrixKind::Iid => self.n() * self.big_n(),
            _ => self.outer_block_count() * self.inner_count(),
        }
    }
}
