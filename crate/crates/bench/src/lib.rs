//! Shared fixtures for the benchmarks.

use structcs_core::experiment::generate_sparse_signal;
use structcs_core::matrix::{build_structured, BlockStructureSpec, DistKind};
use structcs_core::{LinearOperator, SensingMatrix};

/// Row-to-column ratio used by the operator benchmarks.
pub const UNDERSAMPLING: usize = 4;

/// `N/4 x N` block Toeplitz matrix with `d`-row blocks and unit-width columns.
pub fn toeplitz_block(big_n: usize, d: usize, seed: u64) -> SensingMatrix {
    let rows = big_n / UNDERSAMPLING;
    let spec = BlockStructureSpec::toeplitz_block(big_n, rows / d, d, 1, DistKind::Gaussian, seed);
    build_structured(&spec).expect("valid benchmark spec")
}

pub fn iid(rows: usize, cols: usize, seed: u64) -> SensingMatrix {
    build_structured(&BlockStructureSpec::iid(
        rows,
        cols,
        DistKind::Gaussian,
        seed,
    ))
    .expect("valid benchmark spec")
}

/// Dense test vector with a fixed pseudo-random pattern.
pub fn test_vector(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| ((i * 7919) % 1013) as f64 / 1013.0 - 0.5)
        .collect()
}

/// Measurements of an `m`-sparse signal.
pub fn measurements(op: &dyn LinearOperator, m: usize, seed: u64) -> Vec<f64> {
    let signal = generate_sparse_signal(op.ncols(), m, seed).expect("m <= N");
    signal.measure(op).expect("dimensions agree")
}
