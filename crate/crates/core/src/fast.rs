//! Matrix-vector products.
//!
//! Every supported block layout is a Toeplitz block matrix over some
//! sequence of `k+l-1` dense `d x e` blocks (circulant layouts repeat the
//! `k` generating blocks along the sequence). For each within-block pair
//! `(r, s)` the scalar sequence `h_rs[j] = B_j[r, s]` is convolved with the
//! `s`-th strided slice of `x`. A circular convolution of length
//! `L >= k+l-1` reproduces the needed outputs `k-1 .. k+l-2` without
//! wraparound, so `L` is the next power of two.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::matrix::{BlockData, BlockStructureSpec, MatrixKind, SensingMatrix};

/// A real linear map `R^N -> R^n` with its adjoint.
pub trait LinearOperator: Send + Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64>;

    fn dims(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }

    /// Column `j`, by default `A e_j`.
    fn column(&self, j: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.ncols()];
        e[j] = 1.0;
        self.apply(&e)
    }

    /// `A A^T`, by default one adjoint and one forward application per row.
    fn outer_gram(&self) -> DMatrix<f64> {
        let n = self.nrows();
        let mut g = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for i in 0..n {
            e[i] = 1.0;
            let col = self.apply(&self.apply_adjoint(&e));
            g.column_mut(i).copy_from_slice(&col);
            e[i] = 0.0;
        }
        // symmetrize away roundoff from the two products
        (&g + g.transpose()) * 0.5
    }
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols(), "operator input length");
        let x = DVector::from_column_slice(x);
        (self * x).as_slice().to_vec()
    }

    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows(), "adjoint input length");
        let y = DVector::from_column_slice(y);
        self.tr_mul(&y).as_slice().to_vec()
    }

    fn column(&self, j: usize) -> Vec<f64> {
        self.column(j).as_slice().to_vec()
    }

    fn outer_gram(&self) -> DMatrix<f64> {
        self * self.transpose()
    }
}

impl LinearOperator for SensingMatrix {
    fn nrows(&self) -> usize {
        self.entries().nrows()
    }

    fn ncols(&self) -> usize {
        self.entries().ncols()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.entries().apply(x)
    }

    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        self.entries().apply_adjoint(y)
    }

    fn column(&self, j: usize) -> Vec<f64> {
        LinearOperator::column(self.entries(), j)
    }

    fn outer_gram(&self) -> DMatrix<f64> {
        self.entries().outer_gram()
    }
}

/// Exact dense product `M x`.
pub fn dense_matvec(m: &SensingMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.ncols(),
            found: x.len(),
        });
    }
    Ok(m.entries().apply(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductPath {
    Fft,
    DenseFallback,
}

#[derive(Debug, Clone)]
pub struct Product {
    pub values: Vec<f64>,
    pub path: ProductPath,
}

/// FFT-backed operator for block Toeplitz and circulant layouts.
pub struct FftOperator {
    k: usize,
    l: usize,
    d: usize,
    e: usize,
    rows: usize,
    len: usize,
    /// Spectra of `h_rs`, indexed `r * e + s`.
    spectra: Vec<Vec<Complex64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftOperator")
            .field("k", &self.k)
            .field("l", &self.l)
            .field("d", &self.d)
            .field("e", &self.e)
            .field("rows", &self.rows)
            .field("len", &self.len)
            .finish()
    }
}

/// Position of the generating block used at sequence index `j`.
fn sequence_block(spec: &BlockStructureSpec, j: usize) -> usize {
    match spec.kind {
        MatrixKind::ToeplitzBlock | MatrixKind::Deterministic => j,
        _ => j % spec.k,
    }
}

impl FftOperator {
    /// `rows` may be less than `l*d` for a truncated matrix.
    pub fn new(spec: &BlockStructureSpec, blocks: &BlockData, rows: usize) -> Result<Self> {
        match spec.kind {
            MatrixKind::ToeplitzBlock
            | MatrixKind::CirculantBlock
            | MatrixKind::CirculantCirculant
            | MatrixKind::CirculantCirculantBlock
            | MatrixKind::Deterministic => {}
            MatrixKind::Iid => {
                return Err(Error::Unsupported(
                    "IID matrices have no block structure".into(),
                ))
            }
        }
        let (k, l, d, e) = (spec.k, spec.l, spec.d, spec.e);
        if blocks.rows != d || blocks.cols != e || blocks.blocks.len() != spec.outer_block_count() {
            return Err(Error::InconsistentDims(format!(
                "block data {}x{} x{} does not match spec {d}x{e} x{}",
                blocks.rows,
                blocks.cols,
                blocks.blocks.len(),
                spec.outer_block_count()
            )));
        }
        if rows == 0 || rows > l * d {
            return Err(Error::InconsistentDims(format!(
                "row count {rows} outside 1..={}",
                l * d
            )));
        }
        let seq = spec.sequence_len();
        let len = seq.next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let mut spectra = Vec::with_capacity(d * e);
        for r in 0..d {
            for s in 0..e {
                let mut h = vec![Complex64::new(0.0, 0.0); len];
                for (j, slot) in h.iter_mut().take(seq).enumerate() {
                    slot.re = blocks.blocks[sequence_block(spec, j)][r * e + s];
                }
                fwd.process(&mut h);
                spectra.push(h);
            }
        }
        Ok(Self {
            k,
            l,
            d,
            e,
            rows,
            len,
            spectra,
            fwd,
            inv,
        })
    }

    pub fn fft_len(&self) -> usize {
        self.len
    }
}

impl LinearOperator for FftOperator {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.k * self.e
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols(), "operator input length");
        let (k, l, d, e, len) = (self.k, self.l, self.d, self.e, self.len);
        let zero = Complex64::new(0.0, 0.0);
        let xs: Vec<Vec<Complex64>> = (0..e)
            .map(|s| {
                let mut buf = vec![zero; len];
                for c in 0..k {
                    buf[c].re = x[c * e + s];
                }
                self.fwd.process(&mut buf);
                buf
            })
            .collect();
        let scale = 1.0 / len as f64;
        let mut y = vec![0.0; self.rows];
        let mut acc = vec![zero; len];
        for r in 0..d {
            acc.fill(zero);
            for (s, xs) in xs.iter().enumerate() {
                for ((a, h), v) in acc.iter_mut().zip(&self.spectra[r * e + s]).zip(xs) {
                    *a += h * v;
                }
            }
            self.inv.process(&mut acc);
            for a in 0..l {
                let row = a * d + r;
                if row < self.rows {
                    y[row] = acc[k - 1 + a].re * scale;
                }
            }
        }
        y
    }

    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "adjoint input length");
        let (k, l, d, e, len) = (self.k, self.l, self.d, self.e, self.len);
        let zero = Complex64::new(0.0, 0.0);
        let ys: Vec<Vec<Complex64>> = (0..d)
            .map(|r| {
                let mut buf = vec![zero; len];
                for (a, b) in buf.iter_mut().take(l).enumerate() {
                    let row = a * d + r;
                    if row < self.rows {
                        b.re = y[row];
                    }
                }
                self.fwd.process(&mut buf);
                buf
            })
            .collect();
        let scale = 1.0 / len as f64;
        let mut x = vec![0.0; k * e];
        let mut acc = vec![zero; len];
        for s in 0..e {
            acc.fill(zero);
            for (r, ys) in ys.iter().enumerate() {
                for ((a, h), v) in acc.iter_mut().zip(&self.spectra[r * e + s]).zip(ys) {
                    *a += h * v.conj();
                }
            }
            self.inv.process(&mut acc);
            for c in 0..k {
                x[c * e + s] = acc[k - 1 - c].re * scale;
            }
        }
        x
    }
}

/// Either an FFT plan or the dense matrix, for structures without one.
#[derive(Debug)]
pub enum StructuredOperator {
    Fft(FftOperator),
    Dense(DMatrix<f64>),
}

impl StructuredOperator {
    pub fn new(spec: &BlockStructureSpec, blocks: &BlockData) -> Result<Self> {
        Self::with_rows(spec, blocks, spec.n())
    }

    pub fn with_rows(spec: &BlockStructureSpec, blocks: &BlockData, rows: usize) -> Result<Self> {
        spec.validate()?;
        if spec.kind == MatrixKind::Iid {
            // a single block holding the whole matrix
            if blocks.blocks.len() != 1 || blocks.rows != spec.n() || blocks.cols != spec.big_n() {
                return Err(Error::InconsistentDims(
                    "IID block data must be one n x N block".into(),
                ));
            }
            let m = DMatrix::from_row_slice(blocks.rows, blocks.cols, &blocks.blocks[0]);
            return Ok(Self::Dense(m.rows(0, rows).into_owned()));
        }
        Ok(Self::Fft(FftOperator::new(spec, blocks, rows)?))
    }

    /// Operator for an existing matrix (truncated matrices included).
    pub fn for_matrix(m: &SensingMatrix) -> Result<Self> {
        Self::with_rows(m.spec(), &m.blocks(), m.nrows())
    }

    pub fn path(&self) -> ProductPath {
        match self {
            Self::Fft(_) => ProductPath::Fft,
            Self::Dense(_) => ProductPath::DenseFallback,
        }
    }
}

impl LinearOperator for StructuredOperator {
    fn nrows(&self) -> usize {
        match self {
            Self::Fft(op) => op.nrows(),
            Self::Dense(m) => m.nrows(),
        }
    }

    fn ncols(&self) -> usize {
        match self {
            Self::Fft(op) => op.ncols(),
            Self::Dense(m) => m.ncols(),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Fft(op) => op.apply(x),
            Self::Dense(m) => m.apply(x),
        }
    }

    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Self::Fft(op) => op.apply_adjoint(y),
            Self::Dense(m) => m.apply_adjoint(y),
        }
    }
}

/// `M x` computed from the block data alone.
pub fn fast_matvec(spec: &BlockStructureSpec, blocks: &BlockData, x: &[f64]) -> Result<Product> {
    if x.len() != spec.big_n() {
        return Err(Error::DimensionMismatch {
            expected: spec.big_n(),
            found: x.len(),
        });
    }
    let op = StructuredOperator::new(spec, blocks)?;
    Ok(Product {
        values: op.apply(x),
        path: op.path(),
    })
}

/// `M^T y` computed from the block data alone.
pub fn fast_adjoint_matvec(
    spec: &BlockStructureSpec,
    blocks: &BlockData,
    y: &[f64],
) -> Result<Product> {
    if y.len() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            found: y.len(),
        });
    }
    let op = StructuredOperator::new(spec, blocks)?;
    Ok(Product {
        values: op.apply_adjoint(y),
        path: op.path(),
    })
}
