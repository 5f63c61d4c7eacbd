//! Sensing matrix construction.
//!
//! Every matrix is built from a [`BlockStructureSpec`]. Each entry carries the
//! label of the scalar random variable it copies (`var_id`), so structural
//! sharing can be analyzed exactly without comparing floating-point values.
//!
//! Blocks are laid out 0-based: the block at block row `a`, block column `c`
//! of a Toeplitz block matrix is the sequence element `k-1+a-c`, so the first
//! block row reads `Phi_k, ..., Phi_1` in the usual 1-based notation.
//! Circulant layouts reduce the same index modulo `k`.

pub mod io;
mod spec;

pub use spec::{BlockStructureSpec, DistKind, EntryDistribution, MatrixKind, NestedSpec};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng::substream;

/// A materialized `n x N` matrix together with the spec that generated it.
#[derive(Debug, Clone)]
pub struct SensingMatrix {
    entries: DMatrix<f64>,
    var_id: DMatrix<usize>,
    spec: BlockStructureSpec,
    variables: Vec<f64>,
}

impl SensingMatrix {
    /// Assembles a matrix from per-label values using the spec's layout.
    pub(crate) fn from_variables(spec: BlockStructureSpec, variables: Vec<f64>) -> Self {
        let (rows, cols) = (spec.n(), spec.big_n());
        debug_assert_eq!(variables.len(), spec.variable_count());
        let var_id = DMatrix::from_fn(rows, cols, |i, j| spec.label(i, j));
        let entries = var_id.map(|id| variables[id]);
        Self {
            entries,
            var_id,
            spec,
            variables,
        }
    }

    /// Wraps a dense matrix with no structural sharing (every entry its own
    /// variable). Used for matrices loaded from files.
    pub fn from_dense(entries: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::ZeroDimension { rows, cols });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let spec = BlockStructureSpec::iid(rows, cols, DistKind::Gaussian, 0);
        let var_id = DMatrix::from_fn(rows, cols, |i, j| i * cols + j);
        // labels are row-major, storage is column-major
        let variables = entries.transpose().as_slice().to_vec();
        Ok(Self {
            entries,
            var_id,
            spec,
            variables,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn var_id(&self) -> &DMatrix<usize> {
        &self.var_id
    }

    pub fn spec(&self) -> &BlockStructureSpec {
        &self.spec
    }

    /// Value of every scalar variable, indexed by label.
    pub fn variables(&self) -> &[f64] {
        &self.variables
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    /// Keeps only the first `rows` rows. The spec is retained unchanged, so
    /// `nrows()` may be smaller than `spec().n()` afterwards.
    pub fn truncate_rows(mut self, rows: usize) -> Result<Self> {
        if rows == 0 {
            return Err(Error::ZeroDimension {
                rows,
                cols: self.ncols(),
            });
        }
        if rows > self.nrows() {
            return Err(Error::IndexOutOfRange {
                index: rows,
                len: self.nrows(),
            });
        }
        self.entries = self.entries.rows(0, rows).into_owned();
        self.var_id = self.var_id.rows(0, rows).into_owned();
        Ok(self)
    }

    /// The dense block data behind the layout. An IID matrix is a single
    /// `n x N` block.
    pub fn blocks(&self) -> BlockData {
        BlockData::from_spec(&self.spec, &self.variables)
    }
}

/// The distinct dense `d x e` blocks of a block-structured matrix, each
/// stored row-major.
///
/// For Toeplitz layouts this is the `k+l-1` element block sequence; for
/// circulant layouts it is the `k` generating blocks, with any inner
/// circulant structure already expanded. An IID matrix is one `n x N`
/// block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockData {
    pub rows: usize,
    pub cols: usize,
    pub blocks: Vec<Vec<f64>>,
}

impl BlockData {
    pub fn from_spec(spec: &BlockStructureSpec, variables: &[f64]) -> Self {
        if spec.kind == MatrixKind::Iid {
            return Self {
                rows: spec.n(),
                cols: spec.big_n(),
                blocks: vec![variables.to_vec()],
            };
        }
        let (d, e) = (spec.d, spec.e);
        let inner = spec.inner_count();
        let blocks = (0..spec.outer_block_count())
            .map(|b| {
                let mut block = Vec::with_capacity(d * e);
                for r in 0..d {
                    for s in 0..e {
                        block.push(variables[b * inner + spec.inner_label(r, s)]);
                    }
                }
                block
            })
            .collect();
        Self {
            rows: d,
            cols: e,
            blocks,
        }
    }
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::ZeroDimension { rows, cols });
    }
    Ok(())
}

/// An `rows x cols` matrix of independent draws from `dist`.
pub fn sample_iid(
    rows: usize,
    cols: usize,
    dist: EntryDistribution,
    seed: u64,
) -> Result<SensingMatrix> {
    check_dims(rows, cols)?;
    let spec = BlockStructureSpec {
        kind: MatrixKind::Iid,
        k: cols,
        l: rows,
        d: 1,
        e: 1,
        nested: None,
        distribution: dist,
        seed,
    };
    spec.validate()?;
    let mut rng = substream(seed, 0);
    let variables = (0..rows * cols).map(|_| dist.sample(&mut rng)).collect();
    Ok(SensingMatrix::from_variables(spec, variables))
}

/// Builds any random structured matrix described by `spec`.
///
/// Each outer block is drawn from its own substream `(seed, block id)`.
/// Deterministic specs are rejected; use [`crate::deterministic`].
pub fn build_structured(spec: &BlockStructureSpec) -> Result<SensingMatrix> {
    spec.validate()?;
    match spec.kind {
        MatrixKind::Iid => {
            let mut m = sample_iid(spec.n(), spec.big_n(), spec.distribution, spec.seed)?;
            m.spec = spec.clone();
            Ok(m)
        }
        MatrixKind::Deterministic => Err(Error::Unsupported(
            "deterministic matrices are built by the deterministic module".into(),
        )),
        _ => {
            let inner = spec.inner_count();
            let mut variables = Vec::with_capacity(spec.variable_count());
            for b in 0..spec.outer_block_count() {
                let mut rng = substream(spec.seed, b as u64);
                variables.extend((0..inner).map(|_| spec.distribution.sample(&mut rng)));
            }
            Ok(SensingMatrix::from_variables(spec.clone(), variables))
        }
    }
}
